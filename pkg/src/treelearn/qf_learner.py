"""Quantifier-free parameter learning with a lowest-common-ancestor oracle.

A parameter only matters through its relations to the example nodes, so the
learner collects a small candidate set around the examples (the LCA closure
and its two-hop neighborhood), then looks for a parameter tuple under which
no positive and negative example have the same atomic features.  The
hypothesis is a DNF over those atoms.

All tree access goes through an ``OracleSession`` so the calls are counted.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import Sequence

from .mso_compiler import Formula, format_formula, parse_formula
from .mso_learner import NoConsistentHypothesis
from .tree_core import (ABSENT, BINARY, UNRANKED, LabeledTree, OracleSession, TrainingSet)
from .generators import tree_from_children

# sentinel parameter standing for a node outside every relation
BOTTOM = ABSENT

# (oracle relation, formula head, parameter is first argument)
_ATOMS_BINARY = (("E1", "E1", False), ("E1", "E1", True), ("E2", "E2", False),
                 ("E2", "E2", True), ("<=", "leq", False), ("<=", "leq", True))
_ATOMS_UNRANKED = _ATOMS_BINARY + (("sib<=", "sibleq", False), ("sib<=", "sibleq", True))


def atoms_for(mode: str):
    return _ATOMS_UNRANKED if mode == UNRANKED else _ATOMS_BINARY


@dataclass(frozen=True)
class SufficientSet:
    nodes: frozenset
    multiplicity: int


@dataclass(frozen=True)
class QFHypothesis:
    formula: Formula
    params: tuple[int, ...]

    def text(self) -> str:
        return format_formula(self.formula)


def lca_closure(session: OracleSession, train: TrainingSet) -> set[int]:
    """Example nodes plus all pairwise lowest common ancestors.

    The pairwise set is already closed: the lca of two lcas is again the
    lca of two of the original nodes.
    """
    nodes = sorted(train.nodes)
    out = set(nodes)
    for i, u in enumerate(nodes):
        for v in nodes[i + 1:]:
            out.add(session.lca(u, v))
    return out


def sufficient_set(session: OracleSession, train: TrainingSet, mode: str | None = None) -> SufficientSet:
    mode = mode or session.tree.mode
    core = lca_closure(session, train)
    seen = set(core)
    frontier = core
    for _ in range(2):
        nxt = set()
        for u in sorted(frontier):
            nxt |= session.neighborhood(u)
        frontier = nxt - seen
        seen |= nxt
    return SufficientSet(frozenset(seen), 2 if mode == UNRANKED else 1)


class FeatureTable:
    """Atomic features of examples against candidate parameters, cached."""

    def __init__(self, session: OracleSession, mode: str):
        self.session = session
        self.atoms = atoms_for(mode)
        self._cache: dict[tuple[int, int], tuple[bool, ...]] = {}
        self._labels: dict[int, str] = {}

    def label(self, u: int) -> str:
        if u not in self._labels:
            self._labels[u] = self.session.label(u)
        return self._labels[u]

    def row(self, u: int, w: int) -> tuple[bool, ...]:
        """Atom values for example u and parameter w; last entry is u = w."""
        key = (u, w)
        got = self._cache.get(key)
        if got is None:
            if w == BOTTOM:
                got = (False,) * (len(self.atoms) + 1)
            else:
                vals = []
                for rel, _, param_first in self.atoms:
                    args = (w, u) if param_first else (u, w)
                    vals.append(self.session.relation(rel, args))
                vals.append(u == w)
                got = tuple(vals)
            self._cache[key] = got
        return got

    def vector(self, u: int, params: Sequence[int]) -> tuple:
        out = [self.label(u)]
        for w in params:
            out.extend(self.row(u, w))
        return tuple(out)


def _separates(train: TrainingSet, vec) -> bool:
    pos = {vec(u) for u in train.positives}
    return not any(vec(u) in pos for u in train.negatives)


def learn_qf(session: OracleSession, train: TrainingSet, ell: int,
             mode: str | None = None) -> QFHypothesis:
    """Consistent quantifier-free hypothesis with parameters from the sufficient set.

    Parameter tuples are tried by increasing size in a fixed order; unused
    slots hold ``BOTTOM``.  Raises ``NoConsistentHypothesis`` if none exists.
    """
    if ell < 0:
        raise ValueError("ell must be non-negative")
    mode = mode or session.tree.mode
    if not train.negatives:
        return QFHypothesis(("true",), (BOTTOM,) * _slots(ell, mode))
    if not train.positives:
        return QFHypothesis(("false",), (BOTTOM,) * _slots(ell, mode))
    slots = _slots(ell, mode)
    table = FeatureTable(session, mode)
    cands = sorted(sufficient_set(session, train, mode).nodes)
    for k in range(slots + 1):
        for combo in combinations(cands, k):
            if _separates(train, lambda u: table.vector(u, combo)):
                params = combo + (BOTTOM,) * (slots - k)
                return QFHypothesis(_dnf(table, train, combo), params)
    raise NoConsistentHypothesis(f"no quantifier-free hypothesis with {slots} parameters")


def _slots(ell: int, mode: str) -> int:
    return 2 * ell if mode == UNRANKED else ell


def _dnf(table: FeatureTable, train: TrainingSet, combo: Sequence[int]) -> Formula:
    """Disjunction of positive feature patterns, after dropping unneeded atoms."""
    vec = {u: table.vector(u, combo) for u in train.nodes}
    width = len(next(iter(vec.values())))
    keep = list(range(width))
    for c in range(width):
        trial = [k for k in keep if k != c]
        if _separates(train, lambda u: tuple(vec[u][k] for k in trial)):
            keep = trial
    literals = _column_atoms(table, combo)
    disjuncts = []
    for pattern in sorted({tuple(vec[u][k] for k in keep) for u in train.positives}, key=repr):
        lits = []
        for k, val in zip(keep, pattern):
            if k == 0:
                lits.append(("label", val, "x"))
            else:
                atom = literals[k]
                lits.append(atom if val else ("not", atom))
        disjuncts.append(_join("and", lits, ("true",)))
    return _join("or", disjuncts, ("false",))


def _column_atoms(table: FeatureTable, combo: Sequence[int]) -> dict[int, Formula]:
    out = {}
    k = 1
    for i, _ in enumerate(combo):
        y = f"y{i + 1}"
        for _, head, param_first in table.atoms:
            out[k] = (head, y, "x") if param_first else (head, "x", y)
            k += 1
        out[k] = ("eq", "x", y)
        k += 1
    return out


def _join(op: str, parts: list, empty: Formula) -> Formula:
    if not parts:
        return empty
    acc = parts[-1]
    for p in reversed(parts[:-1]):
        acc = (op, p, acc)
    return acc


def hypothesis_params(h: QFHypothesis) -> tuple[int, ...]:
    """Parameter values in the order of ``y1, y2, ...`` that the formula uses."""
    return tuple(v for v in h.params if v != BOTTOM)


# -- fixture family ----------------------------------------------------------------

def gen_lemma3_tree(m: int, ell: int) -> tuple[LabeledTree, TrainingSet, dict]:
    """Binary tree where local exploration cannot tell the two example groups apart.

    A chain of m edges leads from the root to a split node with two children
    v and v'.  Below each of them a balanced binary fan reaches ell + 1 chains
    of m edges; the chain ends are positive under v and negative under v'.
    Returns the tree, the training set and the named nodes ``split``, ``v``,
    ``v2``.
    """
    if m < 1 or ell < 0:
        raise ValueError("need m >= 1 and ell >= 0")
    children: list[list[int]] = []

    def new() -> int:
        children.append([])
        return len(children) - 1

    def chain(top: int, length: int) -> int:
        u = top
        for _ in range(length):
            c = new()
            children[u][:] = [c, ABSENT]
            u = c
        return u

    leaves: dict[str, list[int]] = {"+": [], "-": []}

    def fan(node: int, k: int, sign: str) -> None:
        if k == 1:
            leaves[sign].append(chain(node, m))
            return
        a, b = new(), new()
        children[node].extend([a, b])
        fan(a, (k + 1) // 2, sign)
        fan(b, k // 2, sign)

    root = new()
    split = chain(root, m)
    v, v2 = new(), new()
    children[split].extend([v, v2])
    fan(v, ell + 1, "+")
    fan(v2, ell + 1, "-")
    tree, rank = tree_from_children(["a"] * len(children), children, mode=BINARY)
    train = TrainingSet.of([(rank[u], "+") for u in leaves["+"]] +
                           [(rank[u], "-") for u in leaves["-"]])
    return tree, train, {"split": rank[split], "v": rank[v], "v2": rank[v2]}


STRICT_DESCENDANT = parse_formula("(and (leq y x) (not (eq x y)))")
