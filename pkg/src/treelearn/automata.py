"""Deterministic bottom-up tree automata and their simulation on heavy paths.

States are numbered ``1..n``.  Index ``0`` plays two roles that coincide:
it is the extra start state ``q0`` of the path automaton, and, inside the
transition table, the state of an absent child.  With that convention one
array ``delta[letter, left, right]`` covers leaves (``delta[a, 0, 0]``),
nodes with one child, and nodes with two children.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from itertools import product
from typing import Iterable, Mapping, Sequence

import numpy as np

from .heavy_path import HeavyPathDecomposition, decompose
from .tree_core import ABSENT, LabeledTree

MARKS = ("?", "N", "P")
Q0 = 0
LEFT, RIGHT = "L", "R"


class AlphabetError(ValueError):
    pass


@dataclass(frozen=True)
class Sigma1:
    """Letters (label, mark, parameter subset) packed into dense integers."""

    labels: tuple[str, ...]
    num_params: int

    @property
    def size(self) -> int:
        return len(self.labels) * 3 * (1 << self.num_params)

    def index(self, label: str, mark: str = "?", ymask: int = 0) -> int:
        try:
            li = self.labels.index(label)
        except ValueError:
            raise AlphabetError(f"label {label!r} is outside the automaton alphabet") from None
        return (li * 3 + MARKS.index(mark)) * (1 << self.num_params) + ymask

    def decode(self, letter: int) -> tuple[str, str, int]:
        ymask = letter % (1 << self.num_params)
        rest = letter >> self.num_params
        return self.labels[rest // 3], MARKS[rest % 3], ymask

    def letters(self) -> Iterable[tuple[str, str, int]]:
        for a in range(self.size):
            yield self.decode(a)


class TreeAutomaton:
    """Deterministic, complete bottom-up tree automaton over ``Sigma1``."""

    def __init__(self, sigma: Sigma1, delta: np.ndarray, final: Iterable[int]):
        delta = np.asarray(delta, dtype=np.int32)
        n = delta.shape[1] - 1
        if delta.shape != (sigma.size, n + 1, n + 1):
            raise ValueError(f"transition table has shape {delta.shape}, "
                             f"expected {(sigma.size, n + 1, n + 1)}")
        if n < 1 or delta.min() < 1 or delta.max() > n:
            raise ValueError("transition targets must be states 1..n")
        self.sigma = sigma
        self.delta = delta
        self.delta.setflags(write=False)
        self.num_states = n
        fin = np.zeros(n + 1, dtype=bool)
        for q in final:
            if not 1 <= q <= n:
                raise ValueError(f"final state {q} out of range")
            fin[q] = True
        self.final = fin
        self.final.setflags(write=False)

    def __repr__(self) -> str:
        return f"TreeAutomaton(states={self.num_states}, letters={self.sigma.size})"

    @property
    def final_states(self) -> list[int]:
        return [int(q) for q in np.flatnonzero(self.final)]

    def delta0(self, letter: int) -> int:
        return int(self.delta[letter, Q0, Q0])

    def delta2(self, letter: int, left: int, right: int) -> int:
        return int(self.delta[letter, left, right])

    def accepts(self, rho_root: int) -> bool:
        return bool(self.final[rho_root])


# -- decorated trees ----------------------------------------------------------

def node_letters(aut: TreeAutomaton, tree: LabeledTree,
                 marks: Mapping[int, str] | None = None,
                 params: Sequence[int] = ()) -> np.ndarray:
    """Sigma1 letter of every node given example marks and parameter nodes."""
    sig = aut.sigma
    if len(params) > sig.num_params:
        raise ValueError(f"{len(params)} parameters given, automaton has {sig.num_params}")
    try:
        idx = {lab: sig.labels.index(lab) for lab in tree.alphabet}
    except ValueError:
        bad = [lab for lab in tree.alphabet if lab not in sig.labels]
        raise AlphabetError(f"labels {bad} are outside the automaton alphabet") from None
    block = 1 << sig.num_params
    out = np.fromiter((idx[lab] * 3 * block for lab in tree.labels), dtype=np.int64,
                      count=tree.n)
    for u, m in (marks or {}).items():
        out[u] += MARKS.index(m) * block
    for i, v in enumerate(params):
        out[v] += 1 << i
    return out


def marks_of(train) -> dict[int, str]:
    return {u: ("P" if c == "+" else "N") for u, c in train}


def run_dta(aut: TreeAutomaton, tree: LabeledTree, marks: Mapping[int, str] | None = None,
            params: Sequence[int] = (), letters: np.ndarray | None = None) -> np.ndarray:
    """Bottom-up run; entry ``u`` is the state reached at node ``u``."""
    if letters is None:
        letters = node_letters(aut, tree, marks, params)
    rho = np.zeros(tree.n, dtype=np.int64)
    delta = aut.delta
    left, right = tree.left, tree.right
    for u in range(tree.n - 1, -1, -1):
        l = left[u]
        r = right[u]
        rho[u] = delta[letters[u], rho[l] if l != ABSENT else 0, rho[r] if r != ABSENT else 0]
    return rho


def accepts(aut: TreeAutomaton, tree: LabeledTree, marks=None, params=()) -> bool:
    return aut.accepts(int(run_dta(aut, tree, marks, params)[0]))


# -- path automaton -----------------------------------------------------------

class PathAutomaton:
    """String automaton over (Sigma1 letter, cut-off state, side) triples.

    Reading goes from the bottom of a heavy path to its top.  The side names
    where the cut-off child hangs; the state carried along the path is the one
    of the heavy child.
    """

    def __init__(self, dta: TreeAutomaton):
        self.dta = dta
        self.num_states = dta.num_states + 1          # Q' = Q + {q0}
        self.final = dta.final
        d = dta.delta
        # table[p, a, q, side]: side 0 = cut-off on the left, 1 = on the right
        left = np.transpose(d, (2, 0, 1))              # [p, a, q] = d[a, q, p]
        right = np.transpose(d, (1, 0, 2))             # [p, a, q] = d[a, p, q]
        self.table = np.stack([left, right], axis=-1)
        self.table.setflags(write=False)

    def step(self, p: int, letter: tuple[int, int, str]) -> int:
        a, q, side = letter
        return int(self.table[p, a, q, 0 if side == LEFT else 1])

    def run(self, word: Iterable[tuple[int, int, str]], start: int = Q0) -> int:
        p = start
        for letter in word:
            p = self.step(p, letter)
        return p

    def accepts(self, word) -> bool:
        return bool(self.final[self.run(word)])

    def generator(self, a: int, q: int, side: str) -> np.ndarray:
        """State transformation of one letter, as an array over Q'."""
        return np.asarray(self.table[:, a, q, 0 if side == LEFT else 1], dtype=np.int32)


def extended_label(aut: TreeAutomaton, rho: np.ndarray, dec: HeavyPathDecomposition,
                   tree: LabeledTree, u: int, letter: int) -> tuple[int, int, str]:
    """Path-automaton letter of node ``u`` given the run (or the cut-off state).

    A leaf reads ``(a, q0, L)``.  A node with a cut-off child reads the
    cut-off state and its side.  A node with only a heavy child reads ``q0``
    on the side of the missing slot, so the absent column of the table applies.
    """
    return path_letter(dec, tree, u, letter,
                       lambda c: int(rho[c]))


def path_letter(dec: HeavyPathDecomposition, tree: LabeledTree, u: int, letter: int,
                state_of) -> tuple[int, int, str]:
    l, r = tree.left[u], tree.right[u]
    h = dec.heavy[u]
    if h == ABSENT:
        return letter, Q0, LEFT
    if h == l:
        return (letter, state_of(r), RIGHT) if r != ABSENT else (letter, Q0, RIGHT)
    return (letter, state_of(l), LEFT) if l != ABSENT else (letter, Q0, LEFT)


def cutoff_side(dec: HeavyPathDecomposition, tree: LabeledTree, u: int) -> str:
    """Side that the path letter of ``u`` names (cut-off or missing slot)."""
    h = dec.heavy[u]
    if h == ABSENT:
        return LEFT
    return RIGHT if h == tree.left[u] else LEFT


def simulate_on_paths(aut: TreeAutomaton, tree: LabeledTree,
                      dec: HeavyPathDecomposition | None = None,
                      marks=None, params=(), letters: np.ndarray | None = None) -> np.ndarray:
    """Recover the run by reading each heavy path bottom-up with the path automaton."""
    if dec is None:
        dec = decompose(tree)
    if letters is None:
        letters = node_letters(aut, tree, marks, params)
    pa = PathAutomaton(aut)
    rho = np.zeros(tree.n, dtype=np.int64)
    for i in dec.topo_order:
        p = Q0
        for u in reversed(dec.paths[i]):
            p = pa.step(p, path_letter(dec, tree, u, int(letters[u]), lambda c: int(rho[c])))
            rho[u] = p
    return rho


# -- parameter sets of states ---------------------------------------------------

DUPLICATE = -1


def state_parameter_sets(aut: TreeAutomaton) -> tuple[dict[int, set[int]], np.ndarray]:
    """Parameter masks with which each state is reachable, and co-reachability.

    Returns ``(masks, useful)``: ``masks[q]`` is the set of parameter masks of
    trees that reach ``q`` with every parameter used at most once (``DUPLICATE``
    records a repeated one); ``useful[q]`` says whether ``q`` can still lead to
    acceptance in some context.
    """
    sig = aut.sigma
    n = aut.num_states
    reach: dict[int, set[int]] = {q: set() for q in range(1, n + 1)}
    pairs: set[tuple[int, int]] = set()
    frontier: list[tuple[int, int]] = []
    lmask = np.array([sig.decode(a)[2] for a in range(sig.size)], dtype=np.int64)

    def add_all(states: np.ndarray, masks: np.ndarray) -> None:
        for q, m in zip(states.tolist(), masks.tolist()):
            if (q, m) not in pairs:
                pairs.add((q, m))
                reach[q].add(m)
                frontier.append((q, m))

    def combine(lq: int, lm: int, rq: int, rm: int) -> None:
        states = aut.delta[:, lq, rq]
        if DUPLICATE in (lm, rm) or lm & rm:
            masks = np.full(sig.size, DUPLICATE, dtype=np.int64)
        else:
            m = lm | rm
            masks = np.where(lmask & m, DUPLICATE, lmask | m)
        add_all(states, masks)

    combine(Q0, 0, Q0, 0)
    known: list[tuple[int, int]] = [(Q0, 0)]
    while frontier:
        new = frontier.pop()
        known.append(new)
        for other in known:
            combine(*new, *other)
            combine(*other, *new)
    # co-reachability: a state is useful if some context leads to acceptance
    useful = aut.final.copy()
    reachable_states = [q for q in range(1, n + 1) if reach[q]] + [Q0]
    changed = True
    while changed:
        changed = False
        for a in range(sig.size):
            for other in reachable_states:
                tl = aut.delta[a, :, other]
                tr = aut.delta[a, other, :]
                hit = useful[tl] | useful[tr]
                upd = hit & ~useful
                upd[Q0] = False
                if upd.any():
                    useful |= upd
                    changed = True
    useful[Q0] = False
    return reach, useful


def state_params(aut: TreeAutomaton) -> dict[int, int]:
    """The unique parameter mask of every useful state (0 for the others).

    Raises ``AssertionError`` if a useful state is reachable with two
    different masks, which would mean the automaton does not enforce that
    each parameter occurs exactly once.
    """
    reach, useful = state_parameter_sets(aut)
    out = {Q0: 0}
    for q in range(1, aut.num_states + 1):
        masks = reach[q]
        if useful[q] and masks:
            clean = {m for m in masks if m != DUPLICATE}
            if len(masks) != 1 or len(clean) != 1:
                raise AssertionError(f"state {q} carries ambiguous parameter sets {masks}")
            out[q] = next(iter(clean))
        else:
            out[q] = 0
    return out


# -- random automata and serialization -----------------------------------------

def random_dta(sigma: Sigma1, num_states: int, rng: random.Random,
               final_fraction: float = 0.5) -> TreeAutomaton:
    nrng = np.random.default_rng(rng.randrange(1 << 30))
    delta = nrng.integers(1, num_states + 1,
                          size=(sigma.size, num_states + 1, num_states + 1), dtype=np.int32)
    final = [q for q in range(1, num_states + 1) if rng.random() < final_fraction] or [1]
    return TreeAutomaton(sigma, delta, final)


def format_automaton(aut: TreeAutomaton) -> str:
    """Text form: header lines, then one ``delta`` row per (letter, left state)."""
    sig = aut.sigma
    lines = ["dta 1",
             "labels " + " ".join(sig.labels),
             f"params {sig.num_params}",
             f"states {aut.num_states}",
             "final " + " ".join(map(str, aut.final_states))]
    n = aut.num_states
    for a, l in product(range(sig.size), range(n + 1)):
        lab, mark, ym = sig.decode(a)
        row = " ".join(str(int(x)) for x in aut.delta[a, l])
        lines.append(f"delta {lab} {mark} {ym} {l} : {row}")
    return "\n".join(lines) + "\n"


def parse_automaton(text: str) -> TreeAutomaton:
    head: dict[str, list[str]] = {}
    rows: list[list[str]] = []
    for line in text.splitlines():
        parts = line.split()
        if not parts:
            continue
        if parts[0] == "delta":
            rows.append(parts[1:])
        else:
            head[parts[0]] = parts[1:]
    if head.get("dta") != ["1"]:
        raise ValueError("not a version 1 automaton file")
    sig = Sigma1(tuple(head["labels"]), int(head["params"][0]))
    n = int(head["states"][0])
    delta = np.zeros((sig.size, n + 1, n + 1), dtype=np.int32)
    for lab, mark, ym, l, colon, *vals in rows:
        if colon != ":" or len(vals) != n + 1:
            raise ValueError("malformed delta row")
        delta[sig.index(lab, mark, int(ym)), int(l)] = [int(v) for v in vals]
    return TreeAutomaton(sig, delta, [int(q) for q in head.get("final", [])])
