"""Transition monoid of a path automaton and the powerset monoid over it.

Elements of the transition monoid are total maps on the path-automaton
states, composed in reading order: ``(m1 * m2)[q] = m2[m1[q]]``.  Elements
are interned to dense integer ids; id 0 is the identity.

The powerset monoid holds sets of element ids.  Only the sets that actually
arise are created, each interned to an id of its own.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .automata import LEFT, Q0, PathAutomaton, TreeAutomaton, state_params

DEFAULT_MONOID_CAP = 10 ** 5

_WEIGHTS = np.random.default_rng(2024).integers(1, 2 ** 63, size=4096,
                                                dtype=np.uint64) | np.uint64(1)


class MonoidTooLarge(RuntimeError):
    pass


class ParameterFunctionError(AssertionError):
    """Two derivations of a productive element disagree on its parameters."""


@dataclass(frozen=True)
class MonoidElement:
    id: int
    table: tuple[int, ...]
    params: int
    productive: bool


def _row_hash(rows: np.ndarray) -> np.ndarray:
    rows = rows.astype(np.uint64, copy=False)
    return (rows * _WEIGHTS[:rows.shape[-1]]).sum(axis=-1)


def side_index(side: str) -> int:
    return 0 if side == LEFT else 1


class TransitionMonoid:
    """Closure of the letter effects of a path automaton under composition."""

    def __init__(self, dta: TreeAutomaton, cap: int = DEFAULT_MONOID_CAP,
                 check_params: bool = True):
        self.dta = dta
        self.dfa = PathAutomaton(dta)
        self.cap = cap
        nq = self.dfa.num_states
        self.num_states = nq
        sig = dta.sigma
        self.num_params = sig.num_params
        self.all_params = (1 << sig.num_params) - 1
        self.state_param = state_params(dta)
        sp = np.array([self.state_param[q] for q in range(nq)], dtype=np.int64)
        letter_mask = np.array([sig.decode(a)[2] for a in range(sig.size)], dtype=np.int64)
        # every path letter (a, q, side) with its table and parameter set
        tab = self.dfa.table                                    # [p, a, q, side]
        gen_tables = np.ascontiguousarray(np.transpose(tab, (1, 2, 3, 0))).reshape(-1, nq)
        gen_params = (letter_mask[:, None, None] | sp[None, :, None]) \
            * np.ones((1, 1, 2), dtype=np.int64)
        gen_params = gen_params.reshape(-1)
        overlap = (letter_mask[:, None, None] & sp[None, :, None]) \
            * np.ones((1, 1, 2), dtype=np.int64)
        self._gen_overlap = overlap.reshape(-1) != 0
        self._gen_params = gen_params
        self._closure(gen_tables)
        self.gen_id = self.lookup(gen_tables).reshape(sig.size, nq, 2)
        self._finish(check_params)

    # -- construction ----------------------------------------------------------

    def _closure(self, gen_tables: np.ndarray) -> None:
        nq = self.num_states
        uniq_hash, first = np.unique(_row_hash(gen_tables), return_index=True)
        gens = gen_tables[np.sort(first)]
        gen_p = self._gen_params[np.sort(first)]
        gen_bad = self._gen_overlap[np.sort(first)]
        ident = np.arange(nq, dtype=np.int32)
        tables = [ident[None, :]]
        params = [np.zeros(1, dtype=np.int64)]
        dup = [np.zeros(1, dtype=bool)]
        index: dict[int, int] = {int(_row_hash(ident[None, :])[0]): 0}
        size = 1
        frontier = ident[None, :]
        f_params = params[0]
        f_dup = dup[0]
        chunk = max(1, 2_000_000 // max(1, len(gens) * nq))
        while len(frontier):
            next_rows, next_p, next_d = [], [], []
            for s in range(0, len(frontier), chunk):
                fr = frontier[s:s + chunk]
                prod = gens[:, fr]                              # (g, k, nq): g applied after e
                prod = prod.reshape(-1, nq)
                pp = (f_params[s:s + chunk][None, :] | gen_p[:, None]).reshape(-1)
                pd = (f_dup[s:s + chunk][None, :] | gen_bad[:, None]
                      | ((f_params[s:s + chunk][None, :] & gen_p[:, None]) != 0)).reshape(-1)
                hs = _row_hash(prod)
                hu, first = np.unique(hs, return_index=True)
                for h, i in zip(hu.tolist(), first.tolist()):
                    if h in index:
                        continue
                    index[h] = size
                    size += 1
                    if size > self.cap:
                        raise MonoidTooLarge(f"transition monoid exceeds {self.cap} elements")
                    next_rows.append(prod[i])
                    next_p.append(pp[i])
                    next_d.append(pd[i])
            if not next_rows:
                break
            frontier = np.array(next_rows, dtype=np.int32)
            f_params = np.array(next_p, dtype=np.int64)
            f_dup = np.array(next_d, dtype=bool)
            tables.append(frontier)
            params.append(f_params)
            dup.append(f_dup)
        self.tables = np.concatenate(tables).astype(np.int32)
        self.tables.setflags(write=False)
        self._params_first = np.concatenate(params)
        self._dup_first = np.concatenate(dup)
        hashes = _row_hash(self.tables)
        order = np.argsort(hashes)
        self._hash_sorted = hashes[order]
        self._hash_order = order
        if len(np.unique(hashes)) != len(hashes):
            raise RuntimeError("hash collision among monoid elements")

    def _finish(self, check_params: bool) -> None:
        t = self.tables
        fin = self.dta.final
        self.final = fin[t[:, Q0]]
        reach = np.zeros(self.num_states, dtype=bool)
        reach[np.unique(t[:, Q0])] = True
        coreach = np.zeros(self.num_states, dtype=bool)
        for q in range(self.num_states):
            coreach[q] = bool(fin[t[:, q]].any())
        self.reachable_states = reach
        self.coreachable_states = coreach
        r = np.flatnonzero(reach)
        self.productive = coreach[t[:, r]].any(axis=1)
        self.params = np.where(self.productive & ~self._dup_first, self._params_first, 0)
        if check_params:
            self.check_parameter_function()

    def check_parameter_function(self) -> None:
        """Verify that every productive element has one parameter set.

        Every derivation of an element is a word of path letters, and every
        prefix of a productive word is productive.  It is enough to check, for
        every element ``e`` and every letter ``g`` with ``e * g`` productive,
        that the parameters of ``e`` and ``g`` are disjoint and add up.
        """
        nq = self.num_states
        gt = np.ascontiguousarray(np.transpose(self.dfa.table, (1, 2, 3, 0))).reshape(-1, nq)
        gp = self._gen_params
        gbad = self._gen_overlap
        n = len(self.tables)
        chunk = max(1, 2_000_000 // max(1, len(gt) * nq))
        for s in range(0, n, chunk):
            e = np.arange(s, min(n, s + chunk))
            prod = self.mul_many(np.repeat(e, len(gt)), None, gt_rows=np.tile(gt, (len(e), 1)))
            prod = prod.reshape(len(e), len(gt))
            live = self.productive[prod]
            if not live.any():
                continue
            pe = self.params[e][:, None]
            ok = ((pe & gp[None, :]) == 0) & ((pe | gp[None, :]) == self.params[prod]) \
                & ~gbad[None, :] & self.productive[e][:, None]
            if (live & ~ok).any():
                i, j = np.argwhere(live & ~ok)[0]
                raise ParameterFunctionError(
                    f"element {int(e[i])} times letter {int(j)} breaks parameter additivity")

    # -- lookup and multiplication ----------------------------------------------

    def __len__(self) -> int:
        return len(self.tables)

    @property
    def identity(self) -> int:
        return 0

    def lookup(self, rows: np.ndarray) -> np.ndarray:
        h = _row_hash(np.asarray(rows))
        pos = np.searchsorted(self._hash_sorted, h)
        pos = np.minimum(pos, len(self._hash_sorted) - 1)
        ids = self._hash_order[pos]
        if not np.array_equal(self.tables[ids], rows):
            raise KeyError("table is not an element of the monoid")
        return ids

    def mul(self, a: int, b: int) -> int:
        return int(self.lookup(self.tables[b][self.tables[a]][None, :])[0])

    def mul_many(self, a: np.ndarray, b: np.ndarray | None, gt_rows=None) -> np.ndarray:
        ta = self.tables[a]
        tb = self.tables[b] if gt_rows is None else gt_rows
        rows = np.take_along_axis(tb, ta.astype(np.int64), axis=1)
        return self.lookup(rows)

    def product(self, ids) -> int:
        acc = self.identity
        for i in ids:
            acc = self.mul(acc, int(i))
        return acc

    def h(self, word) -> int:
        """Image of a word of path letters ``(sigma1 letter, state, side)``."""
        return self.product(self.generator(a, q, d) for a, q, d in word)

    def generator(self, a: int, q: int, side: str) -> int:
        return int(self.gen_id[a, q, side_index(side)])

    def state_of(self, m: int) -> int:
        """The state reached from the start state: the run value of a path."""
        return int(self.tables[m, Q0])

    def h_prime(self, a: int, m: int, side: str) -> int:
        """Letter carrying a cut-off element instead of a cut-off state."""
        return self.generator(a, self.state_of(m), side)

    def is_final(self, m: int) -> bool:
        return bool(self.final[m])

    def param_of(self, m: int) -> int:
        return int(self.params[m])

    def element(self, m: int) -> MonoidElement:
        return MonoidElement(m, tuple(int(x) for x in self.tables[m]), int(self.params[m]),
                             bool(self.productive[m]))

    def is_idempotent(self, m: int) -> bool:
        return self.mul(m, m) == m


def transition_monoid(dta: TreeAutomaton, cap: int = DEFAULT_MONOID_CAP) -> TransitionMonoid:
    return TransitionMonoid(dta, cap)


class PowerMonoid:
    """Sets of monoid elements, interned; product is the elementwise set product."""

    def __init__(self, monoid: TransitionMonoid):
        self.monoid = monoid
        self.sets: list[np.ndarray] = []
        self._ids: dict[bytes, int] = {}
        self._mul: dict[tuple[int, int], int] = {}
        self._hat: dict[tuple[int, int, int], int] = {}
        self._hits: list[bool] = []
        self.multiplications = 0
        self.one = self.intern(np.array([monoid.identity]))

    def __len__(self) -> int:
        return len(self.sets)

    def intern(self, elems: np.ndarray) -> int:
        arr = np.unique(np.asarray(elems, dtype=np.int64))
        key = arr.tobytes()
        pid = self._ids.get(key)
        if pid is None:
            pid = len(self.sets)
            self._ids[key] = pid
            arr.setflags(write=False)
            self.sets.append(arr)
            self._hits.append(bool(self.monoid.final[arr].any()))
        return pid

    def elems(self, pid: int) -> np.ndarray:
        return self.sets[pid]

    def hits_final(self, pid: int) -> bool:
        return self._hits[pid]

    def final_elements(self, pid: int) -> np.ndarray:
        s = self.sets[pid]
        return s[self.monoid.final[s]]

    def mul(self, p1: int, p2: int) -> int:
        if p1 == self.one:
            return p2
        if p2 == self.one:
            return p1
        key = (p1, p2)
        hit = self._mul.get(key)
        if hit is not None:
            return hit
        self.multiplications += 1
        a, b = self.sets[p1], self.sets[p2]
        prod = self.monoid.mul_many(np.repeat(a, len(b)), np.tile(b, len(a)))
        pid = self.intern(prod)
        self._mul[key] = pid
        return pid

    def product(self, pids) -> int:
        acc = self.one
        for p in pids:
            acc = self.mul(acc, p)
        return acc

    def is_idempotent(self, pid: int) -> bool:
        return self.mul(pid, pid) == pid

    def hat_h(self, a: int, cutoff: int, side: str) -> int:
        """Image of a node letter: all parameter placements, all cut-off elements.

        ``a`` is the Sigma1 letter of the node with an empty parameter mask and
        ``cutoff`` the id of the set of elements of the cut-off path.
        """
        si = side_index(side)
        key = (a, cutoff, si)
        hit = self._hat.get(key)
        if hit is not None:
            return hit
        m = self.monoid
        states = np.unique(m.tables[self.sets[cutoff], Q0])
        ys = np.arange(1 << m.num_params)
        ids = m.gen_id[a + ys[:, None], states[None, :], si]
        pid = self.intern(ids.ravel())
        self._hat[key] = pid
        return pid

    def explain_letter(self, target: int, a: int, cutoff: int, side: str
                       ) -> tuple[int, int] | None:
        """A parameter mask and cut-off element producing ``target`` at a node.

        Candidates are ordered by cut-off element id, then mask.  The mask
        must be exactly the parameters of the target missing from the cut-off
        element.
        """
        m = self.monoid
        si = side_index(side)
        cut = self.sets[cutoff]
        states = m.tables[cut, Q0]
        want = m.params[target]
        for mc, q in zip(cut.tolist(), states.tolist()):
            pc = int(m.params[mc])
            for y in range(1 << m.num_params):
                if m.gen_id[a + y, q, si] != target:
                    continue
                if y & pc or (y | pc) != want:
                    continue
                return y, mc
        return None
