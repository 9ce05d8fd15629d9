"""Compile monadic second-order formulas over the E1/E2 tree into automata.

Formulas are nested tuples, written in a prefix s-expression syntax::

    (and (E1 y x) (label a x))
    (exists z (and (E x z) (E z y)))
    (forall X (implies (in x X) (in y X)))

Variables starting with an upper-case letter range over node sets, all
others over nodes.  ``P`` and ``N`` are the set variables holding the
positive and negative examples.  Besides the primitive atoms ``E1``, ``E2``,
``label``, ``eq`` and ``in`` the following relations are macros expanded
into formulas before compilation:

* ``leq`` / ``lt``: ancestor relation of the tree (reflexive / strict),
* ``sibleq``: reflexive transitive closure of E2,
* ``child``: parent-child in the tree (E1 or E2 in binary mode; first child
  followed by E2 steps in unranked mode),
* ``E``: ``child`` in either direction, ``adj``: E1 or E2 in either direction.

Compilation is the textbook pipeline: an automaton per atom, products for the
connectives, complement for negation, projection plus subset construction for
existential quantifiers.  Every intermediate automaton is minimized.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from functools import lru_cache
from itertools import product as iproduct
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .automata import Sigma1, TreeAutomaton
from .tree_core import ABSENT, BINARY, UNRANKED, LabeledTree

Formula = tuple

DEFAULT_STATE_CAP = 10 ** 6


class FormulaSyntaxError(ValueError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset


class CompileError(ValueError):
    pass


class StateBudgetExceeded(CompileError):
    pass


# -- syntax -------------------------------------------------------------------

BOOL_OPS = {"not": 1, "and": None, "or": None, "implies": 2, "iff": 2}
QUANTIFIERS = ("exists", "forall")
BINARY_ATOMS = ("E1", "E2", "eq", "leq", "lt", "sibleq", "child", "E", "adj")
ALIASES = {"<=": "leq", "<": "lt", "=": "eq", "->": "implies", "<->": "iff",
           "neq": "neq", "!=": "neq"}
_TOK = re.compile(r"\s*(?:(\()|(\))|([^\s()#]+)|(#[^\n]*))")


def is_set_var(name: str) -> bool:
    return name.lstrip("#")[:1].isupper()


def _tokenize(text: str):
    pos = 0
    while pos < len(text):
        m = _TOK.match(text, pos)
        if m is None or m.end() == pos:
            if text[pos:].strip():
                raise FormulaSyntaxError("unexpected character", len(text[:pos].encode()))
            return
        pos = m.end()
        if m.lastindex is None or m.lastindex == 4:
            continue
        start = m.start(m.lastindex)
        yield m.lastindex, m.group(m.lastindex), len(text[:start].encode())


def _read_sexprs(text: str) -> list:
    stack: list[list] = [[]]
    offs: list[int] = []
    for kind, tok, off in _tokenize(text):
        if kind == 1:
            stack.append([])
            offs.append(off)
        elif kind == 2:
            if len(stack) == 1:
                raise FormulaSyntaxError("unbalanced ')'", off)
            done = stack.pop()
            stack[-1].append((done, offs.pop()))
        else:
            stack[-1].append((tok, off))
    if len(stack) != 1:
        raise FormulaSyntaxError("unbalanced '('", offs[-1])
    return stack[0]


def _build(node) -> Formula:
    item, off = node
    if isinstance(item, str):
        if item in ("true", "false"):
            return (item,)
        raise FormulaSyntaxError(f"bare symbol {item!r} is not a formula", off)
    if not item:
        raise FormulaSyntaxError("empty list", off)
    head, hoff = item[0]
    if not isinstance(head, str):
        raise FormulaSyntaxError("operator expected", hoff)
    head = ALIASES.get(head, head)
    args = item[1:]

    def sym(i: int) -> str:
        if i >= len(args) or not isinstance(args[i][0], str):
            raise FormulaSyntaxError(f"{head}: variable expected", off)
        return args[i][0]

    def arity(k: int) -> None:
        if len(args) != k:
            raise FormulaSyntaxError(f"{head} takes {k} arguments", off)

    if head in ("true", "false"):
        arity(0)
        return (head,)
    if head in BOOL_OPS:
        want = BOOL_OPS[head]
        if want is not None:
            arity(want)
        elif not args:
            raise FormulaSyntaxError(f"{head} needs arguments", off)
        return (head,) + tuple(_build(a) for a in args)
    if head in QUANTIFIERS:
        arity(2)
        return (head, sym(0), _build(args[1]))
    if head == "label":
        arity(2)
        return ("label", sym(0), sym(1))
    if head == "neq":
        arity(2)
        return ("not", ("eq", sym(0), sym(1)))
    if head in BINARY_ATOMS:
        arity(2)
        return (head, sym(0), sym(1))
    if head == "in":
        arity(2)
        return ("in", sym(0), sym(1))
    if is_set_var(head):
        arity(1)
        return ("in", sym(0), head)
    raise FormulaSyntaxError(f"unknown operator {head!r}", hoff)


def parse_formula(text: str) -> Formula:
    items = _read_sexprs(text)
    if len(items) != 1:
        raise FormulaSyntaxError("expected exactly one formula", 0)
    return _build(items[0])


def parse_catalog(text: str) -> list[Formula]:
    return [_build(it) for it in _read_sexprs(text)]


def format_formula(f: Formula) -> str:
    op = f[0]
    if op in ("true", "false"):
        return f"({op})"
    if op == "in" and f[2] in ("P", "N"):
        return f"({f[2]} {f[1]})"
    parts = [op]
    for a in f[1:]:
        parts.append(format_formula(a) if isinstance(a, tuple) else a)
    return "(" + " ".join(parts) + ")"


def free_variables(f: Formula) -> set[str]:
    op = f[0]
    if op in ("true", "false"):
        return set()
    if op in BOOL_OPS:
        return set().union(*(free_variables(g) for g in f[1:]))
    if op in QUANTIFIERS:
        return free_variables(f[2]) - {f[1]}
    if op == "label":
        return {f[2]}
    return {f[1], f[2]}


def quantifier_rank(f: Formula) -> int:
    op = f[0]
    if op in BOOL_OPS:
        return max(quantifier_rank(g) for g in f[1:])
    if op in QUANTIFIERS:
        return 1 + quantifier_rank(f[2])
    return 0


def parameter_names(phi: Formula, target: str = "x") -> list[str]:
    """Free node variables of ``phi`` other than the target, sorted by name."""
    names = [v for v in free_variables(phi) if v != target and not is_set_var(v)]
    return sorted(names, key=lambda s: (len(s), s))


def make_psi(phi: Formula, target: str = "x") -> Formula:
    """Consistency formula: every P-node satisfies phi, no N-node does."""
    extra = [v for v in free_variables(phi) if v != target and is_set_var(v)]
    if extra:
        raise CompileError(f"phi has free set variables {sorted(extra)}")
    if target in parameter_names(phi, target) or target in ("P", "N"):
        raise CompileError("bad target variable")
    return ("forall", target,
            ("and", ("implies", ("in", target, "P"), phi),
                    ("implies", ("in", target, "N"), ("not", phi))))


# -- macro expansion -------------------------------------------------------------

def _closure(step: Callable[[str, str], Formula], a: str, b: str) -> Formula:
    """Reflexive transitive closure of ``step`` as a set-quantified formula."""
    X, z, w = "#X", "#z", "#w"
    closed = ("forall", z, ("forall", w,
              ("implies", ("and", ("in", z, X), step(z, w)), ("in", w, X))))
    return ("forall", X, ("implies", ("and", ("in", a, X), closed), ("in", b, X)))


def macro_body(name: str, mode: str) -> Formula:
    """Definition of a macro over the formal variables ``#a`` and ``#b``."""
    a, b = "#a", "#b"
    if name == "adj":
        return ("or", ("E1", a, b), ("E2", a, b), ("E1", b, a), ("E2", b, a))
    if name == "sibleq":
        return _closure(lambda s, t: ("E2", s, t), a, b)
    if name == "leq":
        if mode == BINARY:
            return _closure(lambda s, t: ("or", ("E1", s, t), ("E2", s, t)), a, b)
        c = "#c"
        inner = _closure(lambda s, t: ("or", ("E1", s, t), ("E2", s, t)), c, b)
        return ("or", ("eq", a, b), ("exists", c, ("and", ("E1", a, c), inner)))
    if name == "lt":
        return ("and", ("leq", a, b), ("not", ("eq", a, b)))
    if name == "child":
        if mode == BINARY:
            return ("or", ("E1", a, b), ("E2", a, b))
        c = "#c"
        return ("exists", c, ("and", ("E1", a, c), ("sibleq", c, b)))
    if name == "E":
        return ("or", ("child", a, b), ("child", b, a))
    raise KeyError(name)


MACROS = ("adj", "sibleq", "leq", "lt", "child", "E")


# -- automata with variable tracks ----------------------------------------------

@dataclass
class TrackAutomaton:
    """Deterministic complete automaton over labels x {0,1}^vars.

    Letter index is ``label * 2**k + bits`` where bit ``i`` belongs to
    ``vars[i]``.  States are ``1..n``; index 0 of the table is an absent child.
    """

    vars: tuple[str, ...]
    nlab: int
    delta: np.ndarray
    final: np.ndarray

    @property
    def num_states(self) -> int:
        return self.delta.shape[1] - 1

    @property
    def k(self) -> int:
        return len(self.vars)


_HASH_WEIGHTS = np.random.default_rng(12345).integers(
    1, 2 ** 63, size=4096, dtype=np.uint64) | np.uint64(1)


class _Explorer:
    """Breadth-first discovery of reachable states from arbitrary keys.

    ``combine(t, batch)`` gets a newly discovered state ``t`` and an array of
    already processed states (``t`` included) and returns two id arrays of
    shape ``(len(batch), letters)``: targets for ``(t, s)`` and for ``(s, t)``.
    State 0 stands for an absent child.
    """

    def __init__(self, nletters: int, cap: int):
        self.ids: dict = {}
        self.keys: list = [None]
        self.pending: list[int] = []
        self.nletters = nletters
        self.cap = cap

    def intern(self, keys: Sequence) -> np.ndarray:
        out = np.empty(len(keys), dtype=np.int32)
        for i, key in enumerate(keys):
            sid = self.ids.get(key)
            if sid is None:
                sid = len(self.keys)
                if sid > self.cap:
                    raise StateBudgetExceeded(f"more than {self.cap} states")
                self.ids[key] = sid
                self.keys.append(key)
                self.pending.append(sid)
            out[i] = sid
        return out

    def intern_codes(self, codes: np.ndarray) -> np.ndarray:
        """Intern an integer array of keys, preserving its shape."""
        uniq, inv = np.unique(codes, return_inverse=True)
        return self.intern(uniq.tolist())[inv.reshape(codes.shape)]

    def intern_rows(self, rows: np.ndarray) -> np.ndarray:
        """Intern the rows of a 2-d uint8 array as byte-string keys."""
        m, width = rows.shape
        pad = -width % 8
        if pad:
            rows = np.concatenate([rows, np.zeros((m, pad), dtype=np.uint8)], axis=1)
        words = np.ascontiguousarray(rows).view(np.uint64)
        if words.shape[1] == 1:
            uniq, first, inv = np.unique(words[:, 0], return_index=True, return_inverse=True)
        else:
            mix = (words * _HASH_WEIGHTS[:words.shape[1]]).sum(axis=1)
            _, first, inv = np.unique(mix, return_index=True, return_inverse=True)
            if not np.array_equal(words, words[first[inv.reshape(-1)]]):
                _, first, inv = np.unique(words, axis=0, return_index=True,
                                          return_inverse=True)
        keys = [rows[i].tobytes() for i in first.tolist()]
        return self.intern(keys)[inv.reshape(-1)]

    def run(self, combine) -> np.ndarray:
        blocks = []
        zero = np.zeros(1, dtype=np.int64)
        ts, st = combine(0, zero)
        blocks.append((0, zero, ts, st))
        done = [0]
        while self.pending:
            t = self.pending.pop()
            done.append(t)
            batch = np.array(done, dtype=np.int64)
            ts, st = combine(t, batch)
            blocks.append((t, batch, ts, st))
        n = len(self.keys) - 1
        delta = np.zeros((self.nletters, n + 1, n + 1), dtype=np.int32)
        for t, batch, ts, st in blocks:
            delta[:, t, batch] = ts.T
            delta[:, batch, t] = st.T
        # cells that involve no reachable pair only occur for n == 0
        delta[delta == 0] = 1
        return delta


def _pairwise(combine_one):
    """Adapt a per-pair ``combine(i, j) -> ids`` to the batched interface."""
    def combine(t: int, batch: np.ndarray):
        ts = np.stack([combine_one(t, int(s)) for s in batch])
        st = np.stack([combine_one(int(s), t) for s in batch])
        return ts, st
    return combine


def _atomic(vars_: tuple[str, ...], nlab: int, step, accept, cap: int) -> TrackAutomaton:
    """Automaton from a summary function ``step(label, bits, left, right)``."""
    k = len(vars_)
    nletters = nlab << k
    ex = _Explorer(nletters, cap)
    letters = [(lab, tuple(bool(b >> i & 1) for i in range(k)))
               for lab in range(nlab) for b in range(1 << k)]

    def combine(i: int, j: int) -> np.ndarray:
        l = ex.keys[i] if i else None
        r = ex.keys[j] if j else None
        return ex.intern([step(lab, bits, l, r) for lab, bits in letters])

    delta = ex.run(_pairwise(combine))
    final = np.array([False] + [bool(accept(key)) for key in ex.keys[1:]])
    return minimize(TrackAutomaton(vars_, nlab, delta, final))


def _atom(f: Formula, nlab_names: tuple[str, ...], cap: int) -> TrackAutomaton:
    op = f[0]
    nlab = len(nlab_names)
    if op in ("true", "false"):
        return _atomic((), nlab, lambda lab, bits, l, r: 0, lambda s: op == "true", cap)
    if op == "label":
        want = nlab_names.index(f[1]) if f[1] in nlab_names else -1
        x = f[2]

        def step(lab, bits, l, r):
            return (l is None or l) and (r is None or r) and (not bits[0] or lab == want)
        return _atomic((x,), nlab, step, bool, cap)
    if op == "in":
        x, X = f[1], f[2]
        if x == X:
            raise CompileError("a variable cannot be both a node and a set")
        vs = tuple(sorted((x, X)))
        xi, Xi = vs.index(x), vs.index(X)

        def step(lab, bits, l, r):
            return (l is None or l) and (r is None or r) and (not bits[xi] or bits[Xi])
        return _atomic(vs, nlab, step, bool, cap)
    if op in ("E1", "E2", "eq"):
        x, y = f[1], f[2]
        if x == y:
            if op == "eq":
                return _atom(("true",), nlab_names, cap)
            return _atom(("false",), nlab_names, cap)
        vs = tuple(sorted((x, y)))
        xi, yi = vs.index(x), vs.index(y)
        side = 0 if op == "E1" else 1

        def step(lab, bits, l, r):
            # summary: (y sits at this node, relation found below or here)
            found = bool((l and l[1]) or (r and r[1]))
            if op == "eq":
                found = found or (bits[xi] and bits[yi])
            else:
                kid = (l, r)[side]
                found = found or bool(bits[xi] and kid and kid[0])
            return (bits[yi], found)
        return _atomic(vs, nlab, step, lambda s: s[1], cap)
    if op == "single":
        x = f[1]

        def step(lab, bits, l, r):
            return min(2, (l or 0) + (r or 0) + bits[0])
        return _atomic((x,), nlab, step, lambda s: s == 1, cap)
    raise CompileError(f"not an atom: {op}")


def _letter_map(src_vars: tuple[str, ...], dst_vars: tuple[str, ...], nlab: int) -> np.ndarray:
    """For each letter over ``dst_vars``, the letter over ``src_vars`` it restricts to."""
    kd = len(dst_vars)
    pos = [dst_vars.index(v) for v in src_vars]
    out = np.empty(nlab << kd, dtype=np.int64)
    for lab in range(nlab):
        for bits in range(1 << kd):
            sb = 0
            for i, p in enumerate(pos):
                if bits >> p & 1:
                    sb |= 1 << i
            out[(lab << kd) | bits] = (lab << len(src_vars)) | sb
    return out


def cylindrify(a: TrackAutomaton, vars_: tuple[str, ...]) -> TrackAutomaton:
    if a.vars == vars_:
        return a
    m = _letter_map(a.vars, vars_, a.nlab)
    return TrackAutomaton(vars_, a.nlab, a.delta[m], a.final)


def rename(a: TrackAutomaton, mapping: Mapping[str, str]) -> TrackAutomaton:
    new_names = [mapping.get(v, v) for v in a.vars]
    if len(set(new_names)) != len(new_names):
        # identifying two tracks: restrict to letters where they agree
        raise CompileError("renaming would merge variables")
    order = tuple(sorted(new_names))
    # letter over new order -> letter over old tracks
    k = a.k
    perm = [new_names.index(v) for v in order]     # new pos i holds old track perm[i]
    m = np.empty(a.nlab << k, dtype=np.int64)
    for lab in range(a.nlab):
        for bits in range(1 << k):
            ob = 0
            for i, old in enumerate(perm):
                if bits >> i & 1:
                    ob |= 1 << old
            m[(lab << k) | bits] = (lab << k) | ob
    return TrackAutomaton(order, a.nlab, a.delta[m], a.final)


def product(a: TrackAutomaton, b: TrackAutomaton, op: str, cap: int) -> TrackAutomaton:
    vs = tuple(sorted(set(a.vars) | set(b.vars)))
    a = cylindrify(a, vs)
    b = cylindrify(b, vs)
    nb = b.num_states + 1
    ex = _Explorer(a.delta.shape[0], cap)
    da = a.delta.astype(np.int64)
    db = b.delta.astype(np.int64)

    def combine(t: int, batch: np.ndarray):
        codes = np.array([ex.keys[i] if i else 0 for i in batch.tolist()], dtype=np.int64)
        ct = ex.keys[t] if t else 0
        ta, tb = divmod(ct, nb)
        sa, sb = np.divmod(codes, nb)
        ts = da[:, ta, sa] * nb + db[:, tb, sb]       # (letters, m)
        st = da[:, sa, ta] * nb + db[:, sb, tb]
        return ex.intern_codes(ts.T), ex.intern_codes(st.T)

    delta = ex.run(combine)
    keys = np.array(ex.keys[1:], dtype=np.int64)
    fa = a.final[keys // nb]
    fb = b.final[keys % nb]
    fin = fa & fb if op == "and" else fa | fb
    return minimize(TrackAutomaton(vs, a.nlab, delta, np.concatenate([[False], fin])))


def complement(a: TrackAutomaton) -> TrackAutomaton:
    fin = ~a.final
    fin[0] = False
    return TrackAutomaton(a.vars, a.nlab, a.delta, fin)


def project(a: TrackAutomaton, var: str, cap: int) -> TrackAutomaton:
    """Existentially quantify one track, determinizing by subset construction."""
    if var not in a.vars:
        return a
    vi = a.vars.index(var)
    vs = a.vars[:vi] + a.vars[vi + 1:]
    k = a.k
    n1 = a.num_states + 1
    nl = a.nlab << len(vs)
    src = np.empty((nl, 2), dtype=np.int64)
    for lab in range(a.nlab):
        for bits in range(1 << len(vs)):
            low = bits & ((1 << vi) - 1)
            high = (bits >> vi) << (vi + 1)
            base = (lab << k) | low | high
            src[(lab << len(vs)) | bits] = (base, base | (1 << vi))
    sub = a.delta[src]                                # (nl, 2, n1, n1)
    ex = _Explorer(nl, cap)
    # subset of every discovered state, as rows of a growing boolean matrix
    sets = np.zeros((16, n1), dtype=np.float32)
    sets[0, 0] = 1.0
    count = [1]
    letter_ix = np.arange(nl)[:, None, None]

    def spread(members: np.ndarray, as_left: bool) -> np.ndarray:
        """G[a, other, q] = 1 if some member and ``other`` lead to q under a."""
        if as_left:
            vals = sub[:, :, members, :]               # (nl, 2, |S|, n1): other = right
            vals = vals.transpose(0, 3, 1, 2).reshape(nl, n1, -1)
        else:
            vals = sub[:, :, :, members]               # (nl, 2, n1, |S|): other = left
            vals = vals.transpose(0, 2, 1, 3).reshape(nl, n1, -1)
        g = np.zeros((nl, n1, n1), dtype=np.float32)
        other_ix = np.arange(n1)[None, :, None]
        g[letter_ix, other_ix, vals] = 1.0
        return g

    def rows_to_ids(prod: np.ndarray) -> np.ndarray:
        # prod: (nl, m, n1) counts; returns ids (m, nl)
        m = prod.shape[1]
        bits = np.packbits(prod.transpose(1, 0, 2) > 0.5, axis=2)   # (m, nl, bytes)
        ids = ex.intern_rows(bits.reshape(m * nl, -1)).reshape(m, nl)
        grow()
        return ids

    def grow() -> None:
        nonlocal sets
        total = len(ex.keys)
        while count[0] < total:
            sid = count[0]
            if sid >= sets.shape[0]:
                bigger = np.zeros((2 * sets.shape[0], n1), dtype=np.float32)
                bigger[:sets.shape[0]] = sets
                sets = bigger
            row = np.unpackbits(np.frombuffer(ex.keys[sid], dtype=np.uint8))[:n1]
            sets[sid] = row
            count[0] += 1

    def combine(t: int, batch: np.ndarray):
        members = np.flatnonzero(sets[t])
        others = sets[batch]                           # (m, n1)
        ts = rows_to_ids(np.matmul(others[None, :, :], spread(members, True)))
        st = rows_to_ids(np.matmul(others[None, :, :], spread(members, False)))
        return ts, st

    delta = ex.run(combine)
    grow()
    fin = np.concatenate([[False], (sets[1:len(ex.keys)] @ a.final.astype(np.float32)) > 0.5])
    return minimize(TrackAutomaton(vs, a.nlab, delta, fin))


def minimize(a: TrackAutomaton) -> TrackAutomaton:
    """Coarsest congruence refining acceptance (Moore-style refinement)."""
    n = a.num_states
    if n <= 1:
        return a
    delta = a.delta
    cls = np.zeros(n + 1, dtype=np.int32)
    cls[1:] = a.final[1:]
    cls[0] = -1
    count = len(np.unique(cls[1:]))
    while True:
        c = cls[delta]                                 # (L, n+1, n+1)
        left = c[:, 1:, :].transpose(1, 0, 2).reshape(n, -1)
        right = c[:, :, 1:].transpose(2, 0, 1).reshape(n, -1)
        sig = np.ascontiguousarray(np.concatenate([cls[1:, None], left, right], axis=1))
        view = sig.view(np.dtype((np.void, sig.dtype.itemsize * sig.shape[1]))).reshape(-1)
        _, inv = np.unique(view, return_inverse=True)
        inv = inv.reshape(-1)
        new_count = int(inv.max()) + 1
        cls = np.concatenate([[-1], inv]).astype(np.int32)
        if new_count == count:
            break
        count = new_count
    if count == n:
        return a
    reps = np.zeros(count, dtype=np.int64)
    for q in range(n, 0, -1):
        reps[cls[q]] = q
    idx = np.concatenate([[0], reps])
    sub = delta[:, idx][:, :, idx]
    nd = (cls[sub] + 1).astype(np.int32)
    fin = np.concatenate([[False], a.final[reps]])
    return TrackAutomaton(a.vars, a.nlab, nd, fin)


# -- the compiler ----------------------------------------------------------------

class Compiler:
    def __init__(self, labels: Sequence[str], mode: str = BINARY,
                 state_cap: int = DEFAULT_STATE_CAP):
        if mode not in (BINARY, UNRANKED):
            raise ValueError(mode)
        self.labels = tuple(labels)
        self.mode = mode
        self.cap = state_cap
        self._memo: dict[Formula, TrackAutomaton] = {}
        self._macro: dict[str, TrackAutomaton] = {}
        self.max_states = 0

    def compile(self, f: Formula) -> TrackAutomaton:
        hit = self._memo.get(f)
        if hit is not None:
            return hit
        out = self._compile(f)
        self.max_states = max(self.max_states, out.num_states)
        self._memo[f] = out
        return out

    def _compile(self, f: Formula) -> TrackAutomaton:
        op = f[0]
        if op in ("true", "false", "label", "in", "E1", "E2", "eq", "single"):
            return _atom(f, self.labels, self.cap)
        if op in MACROS:
            x, y = f[1], f[2]
            if x == y:
                body = macro_body(op, self.mode)
                return self.compile(_substitute(body, {"#a": x, "#b": x}))
            base = self._macro.get(op)
            if base is None:
                base = self.compile(macro_body(op, self.mode))
                self._macro[op] = base
            return rename(base, {"#a": x, "#b": y})
        if op == "not":
            return complement(self.compile(f[1]))
        if op in ("and", "or"):
            acc = self.compile(f[1])
            for g in f[2:]:
                acc = product(acc, self.compile(g), op, self.cap)
            return acc
        if op == "implies":
            return product(complement(self.compile(f[1])), self.compile(f[2]), "or", self.cap)
        if op == "iff":
            a, b = self.compile(f[1]), self.compile(f[2])
            both = product(a, b, "and", self.cap)
            neither = product(complement(a), complement(b), "and", self.cap)
            return product(both, neither, "or", self.cap)
        if op in QUANTIFIERS and f[2][0] == ("and" if op == "forall" else "or"):
            # quantifiers distribute over these connectives; smaller subset constructions
            return self.compile((f[2][0],) + tuple((op, f[1], g) for g in f[2][1:]))
        if op == "exists":
            v, body = f[1], self.compile(f[2])
            if not is_set_var(v):
                body = product(body, _atom(("single", v), self.labels, self.cap), "and",
                               self.cap)
            return project(body, v, self.cap)
        if op == "forall":
            return complement(self.compile(("exists", f[1], ("not", f[2]))))
        raise CompileError(f"unsupported operator {op!r}")


def _substitute(f: Formula, mapping: Mapping[str, str]) -> Formula:
    op = f[0]
    if op in ("true", "false"):
        return f
    if op in BOOL_OPS:
        return (op,) + tuple(_substitute(g, mapping) for g in f[1:])
    if op in QUANTIFIERS:
        inner = {k: v for k, v in mapping.items() if k != f[1]}
        return (op, f[1], _substitute(f[2], inner))
    if op == "label":
        return (op, f[1], mapping.get(f[2], f[2]))
    return (op, mapping.get(f[1], f[1]), mapping.get(f[2], f[2]))


def compile_formula(formula: Formula, labels: Sequence[str], mode: str = BINARY,
                    state_cap: int = DEFAULT_STATE_CAP) -> TrackAutomaton:
    return Compiler(labels, mode, state_cap).compile(formula)


def compile(formula: Formula, alphabet: Sequence[str], ell: int | None = None,
            mode: str = BINARY, state_cap: int = DEFAULT_STATE_CAP,
            params: Sequence[str] | None = None) -> TreeAutomaton:
    """Automaton over (label, mark, parameter subset) letters for ``formula``.

    ``formula`` has free variables among ``P``, ``N`` and the node
    parameters; the result additionally insists that every parameter marks
    exactly one node.  Parameters default to the free node variables sorted by
    name; ``ell`` checks their number.
    """
    free = free_variables(formula)
    bad = [v for v in free if is_set_var(v) and v not in ("P", "N")]
    if bad:
        raise CompileError(f"free set variables {sorted(bad)} besides P and N")
    if params is None:
        params = parameter_names(formula, target="")
    params = tuple(params)
    if ell is not None and len(params) != ell:
        if len(params) > ell:
            raise CompileError(f"formula has {len(params)} parameters, expected {ell}")
        params = params + tuple(f"#unused{i}" for i in range(ell - len(params)))
    comp = Compiler(tuple(alphabet), mode, state_cap)
    aut = comp.compile(formula)
    for y in params:
        aut = product(aut, _atom(("single", y), comp.labels, state_cap), "and", state_cap)
    return to_sigma1(aut, tuple(alphabet), params)


def to_sigma1(aut: TrackAutomaton, labels: tuple[str, ...],
              params: tuple[str, ...]) -> TreeAutomaton:
    vs = tuple(sorted(set(aut.vars) | {"P", "N"} | set(params)))
    extra = set(vs) - {"P", "N"} - set(params)
    if extra:
        raise CompileError(f"unexpected free variables {sorted(extra)}")
    aut = cylindrify(aut, vs)
    sig = Sigma1(labels, len(params))
    k = len(vs)
    pi, ni = vs.index("P"), vs.index("N")
    m = np.empty(sig.size, dtype=np.int64)
    for a in range(sig.size):
        lab, mark, ym = sig.decode(a)
        bits = 0
        if mark == "P":
            bits |= 1 << pi
        elif mark == "N":
            bits |= 1 << ni
        for i, y in enumerate(params):
            if ym >> i & 1:
                bits |= 1 << vs.index(y)
        m[a] = (labels.index(lab) << k) | bits
    return TreeAutomaton(sig, aut.delta[m], np.flatnonzero(aut.final).tolist())


def compile_psi(phi: Formula, alphabet: Sequence[str], mode: str = BINARY,
                target: str = "x", state_cap: int = DEFAULT_STATE_CAP) -> TreeAutomaton:
    params = parameter_names(phi, target)
    return compile(make_psi(phi, target), alphabet, len(params), mode, state_cap,
                   params=params)


def compile_query(phi: Formula, alphabet: Sequence[str], mode: str = BINARY,
                  target: str = "x", state_cap: int = DEFAULT_STATE_CAP):
    """Automaton for phi itself; the target is handled as one more parameter."""
    params = [target] + parameter_names(phi, target)
    return compile(phi, alphabet, len(params), mode, state_cap, params=params)


# -- brute-force semantics ----------------------------------------------------------

def _has_set_quantifier(f: Formula) -> bool:
    op = f[0]
    if op in QUANTIFIERS:
        return is_set_var(f[1]) or _has_set_quantifier(f[2])
    if op in BOOL_OPS:
        return any(_has_set_quantifier(g) for g in f[1:])
    return False


class SizeCapExceeded(ValueError):
    pass


def brute_eval(formula: Formula, tree: LabeledTree, assignment: Mapping[str, object],
               max_nodes: int = 12) -> bool:
    """Direct recursive evaluation; set quantifiers enumerate all subsets."""
    if _has_set_quantifier(formula) and tree.n > max_nodes:
        raise SizeCapExceeded(f"tree has {tree.n} nodes, cap is {max_nodes}")
    return _eval(formula, tree, dict(assignment))


def _rel(op: str, t: LabeledTree, u: int, v: int) -> bool:
    if op == "E1":
        return t.left[u] == v
    if op == "E2":
        return t.right[u] == v
    if op == "eq":
        return u == v
    if op == "leq":
        return t.is_ancestor(u, v)
    if op == "lt":
        return u != v and t.is_ancestor(u, v)
    if op == "sibleq":
        w = u
        while w != ABSENT:
            if w == v:
                return True
            w = t.right[w]
        return False
    if op == "child":
        return t.parent[v] == u
    if op == "E":
        return t.parent[v] == u or t.parent[u] == v
    if op == "adj":
        return v in (t.left[u], t.right[u]) or u in (t.left[v], t.right[v])
    raise CompileError(op)


def _eval(f: Formula, t: LabeledTree, env: dict) -> bool:
    op = f[0]
    if op == "true":
        return True
    if op == "false":
        return False
    if op == "not":
        return not _eval(f[1], t, env)
    if op == "and":
        return all(_eval(g, t, env) for g in f[1:])
    if op == "or":
        return any(_eval(g, t, env) for g in f[1:])
    if op == "implies":
        return (not _eval(f[1], t, env)) or _eval(f[2], t, env)
    if op == "iff":
        return _eval(f[1], t, env) == _eval(f[2], t, env)
    if op in QUANTIFIERS:
        v = f[1]
        old = env.get(v, _MISSING)
        if is_set_var(v):
            domain = (frozenset(u for u in range(t.n) if mask >> u & 1)
                      for mask in range(1 << t.n))
        else:
            domain = range(t.n)
        want = op == "exists"
        result = not want
        for val in domain:
            env[v] = val
            if _eval(f[2], t, env) == want:
                result = want
                break
        if old is _MISSING:
            del env[v]
        else:
            env[v] = old
        return result
    if op == "label":
        return t.labels[env[f[2]]] == f[1]
    if op == "in":
        return env[f[1]] in env[f[2]]
    return _rel(op, t, env[f[1]], env[f[2]])


_MISSING = object()


def evaluate_query(phi: Formula, tree: LabeledTree, params: Sequence[int],
                   target: str = "x") -> set[int]:
    """Nodes accepted by ``phi(x; params)``, by direct evaluation."""
    names = parameter_names(phi, target)
    if len(names) != len(params):
        raise ValueError(f"phi has {len(names)} parameters, {len(params)} given")
    env = dict(zip(names, params))
    out = set()
    for u in range(tree.n):
        env[target] = u
        if brute_eval(phi, tree, env):
            out.add(u)
    return out
