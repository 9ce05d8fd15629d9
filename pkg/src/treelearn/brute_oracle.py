"""Exhaustive reference implementations used to check the learners.

Nothing here is clever: every function scans all parameter tuples.  Budget
guards raise instead of silently truncating.
"""

from __future__ import annotations

from itertools import product
from typing import Iterable, Sequence

import numpy as np

from .automata import TreeAutomaton, marks_of, run_dta
from .tree_core import ABSENT, BINARY, UNRANKED, LabeledTree, TrainingSet

DEFAULT_TUPLE_BUDGET = 10**6


class BudgetExceeded(RuntimeError):
    pass


def _guard(n: int, slots: int, budget: int) -> None:
    if n ** slots > budget:
        raise BudgetExceeded(f"{n}^{slots} tuples exceed the budget of {budget}")


def bf_consistent(tree: LabeledTree, aut: TreeAutomaton, params: Sequence[int],
                  train: TrainingSet) -> bool:
    """Run the automaton for psi on the tree decorated with marks and parameters."""
    rho = run_dta(aut, tree, marks_of(train), params)
    return aut.accepts(int(rho[tree.root]))


def bf_search(tree: LabeledTree, aut: TreeAutomaton, train: TrainingSet, ell: int,
              budget: int = DEFAULT_TUPLE_BUDGET) -> tuple[int, ...] | None:
    """First consistent parameter tuple in lexicographic order, or None."""
    _guard(tree.n, ell, budget)
    for params in product(range(tree.n), repeat=ell):
        if bf_consistent(tree, aut, params, train):
            return params
    return None


def classification_matrix(tree: LabeledTree, query: TreeAutomaton, ell: int,
                          budget: int = DEFAULT_TUPLE_BUDGET) -> np.ndarray:
    """Boolean matrix: row per parameter tuple (lexicographic), column per node.

    ``query`` is the automaton of phi with the target as its first parameter.
    """
    n = tree.n
    _guard(n, ell + 1, budget)
    out = np.zeros((n ** ell, n), dtype=bool)
    for r, params in enumerate(product(range(n), repeat=ell)):
        for u in range(n):
            rho = run_dta(query, tree, None, (u,) + params)
            out[r, u] = query.accepts(int(rho[tree.root]))
    return out


def matrix_search(matrix: np.ndarray, train: TrainingSet) -> int | None:
    """Row index of the first parameter tuple consistent with the examples."""
    ok = np.ones(matrix.shape[0], dtype=bool)
    pos, neg = train.positives, train.negatives
    if pos:
        ok &= matrix[:, pos].all(axis=1)
    if neg:
        ok &= ~matrix[:, neg].any(axis=1)
    hit = np.flatnonzero(ok)
    return int(hit[0]) if len(hit) else None


def tuple_of_row(row: int, n: int, ell: int) -> tuple[int, ...]:
    out = []
    for _ in range(ell):
        row, r = divmod(row, n)
        out.append(r)
    return tuple(reversed(out))


# -- quantifier-free side ------------------------------------------------------------

def relation_row(tree: LabeledTree, u: int, w: int, mode: str) -> tuple[bool, ...]:
    """Atoms between example u and parameter w, read straight off the tree."""
    if w == ABSENT:
        return (False,) * (9 if mode == UNRANKED else 7)
    row = [tree.left[u] == w, tree.left[w] == u, tree.right[u] == w, tree.right[w] == u,
           tree.is_ancestor(u, w), tree.is_ancestor(w, u)]
    if mode == UNRANKED:
        row += [tree.sibling_leq(u, w), tree.sibling_leq(w, u)]
    row.append(u == w)
    return tuple(row)


def qf_separable(tree: LabeledTree, train: TrainingSet, params: Sequence[int], mode: str) -> bool:
    def vec(u):
        out = [tree.labels[u]]
        for w in params:
            out.extend(relation_row(tree, u, w, mode))
        return tuple(out)
    pos = {vec(u) for u in train.positives}
    return not any(vec(u) in pos for u in train.negatives)


def bf_qf_search(tree: LabeledTree, train: TrainingSet, ell: int, mode: str | None = None,
                 candidates: Iterable[int] | None = None,
                 budget: int = DEFAULT_TUPLE_BUDGET) -> tuple[int, ...] | None:
    """First parameter tuple (unused slots ``-1``) whose features separate the examples.

    Unranked mode uses ``2 * ell`` slots.  ``candidates`` defaults to all nodes.
    """
    mode = mode or tree.mode
    slots = 2 * ell if mode == UNRANKED else ell
    pool = [ABSENT] + sorted(range(tree.n) if candidates is None else candidates)
    _guard(len(pool), slots, budget)
    for params in product(pool, repeat=slots):
        if qf_separable(tree, train, params, mode):
            return params
    return None


class Distinguishers:
    """For every node pair, the bitmask of parameters telling them apart.

    A parameter tuple separates the examples exactly when every crossing
    (positive, negative) pair differs in label or is distinguished by some
    parameter of the tuple, so existence reduces to a small hitting set.
    """

    def __init__(self, tree: LabeledTree, mode: str | None = None):
        mode = mode or tree.mode
        n = tree.n
        rows = [[relation_row(tree, u, w, mode) for w in range(n)] for u in range(n)]
        self.n = n
        self.mask = [[0] * n for _ in range(n)]
        for a in range(n):
            for b in range(a + 1, n):
                if tree.labels[a] != tree.labels[b]:
                    m = -1
                else:
                    m = 0
                    for w in range(n):
                        if rows[a][w] != rows[b][w]:
                            m |= 1 << w
                self.mask[a][b] = self.mask[b][a] = m

    def separable(self, train: TrainingSet, slots: int, allowed: int = -1) -> bool:
        sets = []
        for p in train.positives:
            for q in train.negatives:
                m = self.mask[p][q]
                if m == -1:
                    continue
                m &= allowed
                if not m:
                    return False
                sets.append(m)
        return _hits(sets, slots)


def _hits(sets: list[int], budget: int) -> bool:
    if not sets:
        return True
    if budget == 0:
        return False
    first = sets[0]
    w = first
    while w:
        bit = w & -w
        w ^= bit
        if _hits([s for s in sets[1:] if not s & bit], budget - 1):
            return True
    return False


def node_mask(nodes: Iterable[int]) -> int:
    m = 0
    for u in nodes:
        m |= 1 << u
    return m
