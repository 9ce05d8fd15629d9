"""Learning parameters of monadic second-order formulas on trees.

The work splits in three phases:

1. ``build_index`` reads the tree once, without any training data.  Each
   heavy path gets a factorization tree over the powerset-monoid images of
   its node letters, bottom-up, so every cut-off subtree is summarized by the
   root label of a smaller path before the path above it is processed.
2. ``apply_training`` marks the example nodes and repairs only the
   factorization trees on the way from those nodes to the root.
3. ``trace`` picks an accepting element at the root and walks down to find
   nodes for the parameters, descending only where parameters are still
   missing.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Mapping, Sequence

import numpy as np

from .automata import LEFT, TreeAutomaton, cutoff_side, marks_of, run_dta
from .factorization import (BINARY_KIND, IDEMPOTENT, LEAF, SIMON, Counter, FactorizationTree,
                            FNode, build_binary, build_simon, update_binary, update_simon)
from .heavy_path import HeavyPathDecomposition, decompose
from .monoid import DEFAULT_MONOID_CAP, PowerMonoid, TransitionMonoid
from .mso_compiler import (DEFAULT_STATE_CAP, Formula, compile_psi, format_formula,
                           parameter_names)
from .tree_core import ABSENT, LabeledTree, TrainingSet


class NoConsistentParameters(Exception):
    """No parameter setting makes the formula consistent with the training set."""


class NoConsistentHypothesis(Exception):
    """No formula of the catalog has a consistent parameter setting."""


@dataclass(frozen=True)
class Hypothesis:
    formula: Formula | None
    params: tuple[int, ...]
    param_names: tuple[str, ...] = ()

    def describe(self) -> str:
        f = format_formula(self.formula) if self.formula is not None else "?"
        return f"{f} with {dict(zip(self.param_names, self.params))}"


@dataclass
class Budget:
    """Node-touch instrumentation, split by phase."""
    indexing: int = 0
    updating: int = 0
    tracing: int = 0


class Index:
    """Per-formula summary of a tree, plus the current example marks.

    The static part (tree shape, decomposition, monoids) is shared between
    copies; the dynamic part (letters, marks, factorization trees) is a set of
    overlays on top of the unmarked state.
    """

    def __init__(self, tree: LabeledTree, aut: TreeAutomaton, kind: str = SIMON,
                 monoid_cap: int = DEFAULT_MONOID_CAP, formula: Formula | None = None,
                 param_names: Sequence[str] = (), power_monoid: PowerMonoid | None = None):
        self.tree = tree
        self.aut = aut
        self.kind = kind
        self.formula = formula
        self.param_names = tuple(param_names)
        self.dec: HeavyPathDecomposition = decompose(tree)
        # a shared power monoid keeps set ids comparable across indexes
        if power_monoid is not None and power_monoid.monoid.dta is not aut:
            raise ValueError("power monoid belongs to a different automaton")
        self.pm = power_monoid or PowerMonoid(TransitionMonoid(aut, monoid_cap))
        self.monoid = self.pm.monoid
        self.budget = Budget()
        sig = aut.sigma
        dec = self.dec
        n = tree.n
        self.labels: dict[int, str] = {}
        self.marks: dict[int, str] = {}
        self.side = [cutoff_side(dec, tree, u) for u in range(n)]
        cut = []
        for u in range(n):
            c = dec.cutoff_child(u, tree)
            cut.append(ABSENT if c is None else c)
        self.cut_child = cut
        # position of each node in the bottom-up sequence of its path
        self.seq_pos = [len(dec.paths[dec.path_of[u]]) - 1 - dec.pos_in_path[u] for u in range(n)]
        self.trees: dict[int, FactorizationTree] = {}
        ctr = Counter()
        builder = build_simon if kind == SIMON else build_binary
        base = self.base_letter
        for i in dec.topo_order:
            seq = [self.hat_letter(u, base(u)) for u in reversed(dec.paths[i])]
            self.trees[i] = builder(seq, self.pm, ctr)
        self.budget.indexing = ctr.touched + n

    # -- letters ---------------------------------------------------------------

    def label_of(self, u: int) -> str:
        return self.labels.get(u, self.tree.labels[u])

    def base_letter(self, u: int) -> int:
        return self.aut.sigma.index(self.label_of(u), self.marks.get(u, "?"), 0)

    def cutoff_label(self, u: int) -> int:
        c = self.cut_child[u]
        if c == ABSENT:
            return self.pm.one
        return self.trees[self.dec.path_of[c]].label

    def hat_letter(self, u: int, base: int) -> int:
        return self.pm.hat_h(base, self.cutoff_label(u), self.side[u])

    @property
    def root_label(self) -> int:
        return self.trees[self.dec.path_of[self.tree.root]].label

    def consistent(self) -> bool:
        return self.pm.hits_final(self.root_label)

    def copy(self) -> "Index":
        other = object.__new__(Index)
        other.__dict__.update(self.__dict__)
        other.labels = dict(self.labels)
        other.marks = dict(self.marks)
        other.trees = dict(self.trees)
        other.budget = Budget(self.budget.indexing)
        return other

    # -- updates ------------------------------------------------------------------

    def update_nodes(self, marks: Mapping[int, str] | None = None,
                     labels: Mapping[int, str] | None = None) -> int:
        """Change marks and labels in place; returns the number of node touches.

        Paths are repaired in dependency order.  A path above is only
        touched when the root label of a path below actually changed.
        """
        ctr = Counter()
        dec = self.dec
        for u, m in (marks or {}).items():
            if m == "?":
                self.marks.pop(u, None)
            else:
                self.marks[u] = m
        for u, lab in (labels or {}).items():
            self.aut.sigma.index(lab)          # rejects unknown labels
            if lab == self.tree.labels[u]:
                self.labels.pop(u, None)
            else:
                self.labels[u] = lab
        pending: dict[int, set[int]] = {}
        for u in set(marks or {}) | set(labels or {}):
            pending.setdefault(dec.path_of[u], set()).add(u)
        heap = [-i for i in pending]
        heapq.heapify(heap)
        update = update_simon if self.kind == SIMON else update_binary
        while heap:
            i = -heapq.heappop(heap)
            nodes = pending.pop(i)
            ups = {self.seq_pos[u]: self.hat_letter(u, self.base_letter(u)) for u in nodes}
            old = self.trees[i]
            new = update(old, ups, ctr)
            self.trees[i] = new
            ctr.touched += len(nodes)
            if new.label == old.label:
                continue
            top = dec.paths[i][0]
            p = dec.parent[top]
            if p == ABSENT:
                continue
            j = dec.path_of[p]
            if j not in pending:
                pending[j] = set()
                heapq.heappush(heap, -j)
            pending[j].add(p)
        return ctr.touched


def build_index(tree: LabeledTree, aut: TreeAutomaton, kind: str = SIMON,
                monoid_cap: int = DEFAULT_MONOID_CAP, formula: Formula | None = None,
                param_names: Sequence[str] = (),
                power_monoid: PowerMonoid | None = None) -> Index:
    return Index(tree, aut, kind, monoid_cap, formula, param_names, power_monoid)


def apply_training(index: Index, train: TrainingSet | Iterable[tuple[int, str]]) -> Index:
    """A copy of ``index`` whose example marks are exactly ``train``."""
    if not isinstance(train, TrainingSet):
        train = TrainingSet.of(train)
    train.validate(index.tree)
    out = index.copy()
    want = marks_of(train)
    changes = {u: m for u, m in want.items() if index.marks.get(u) != m}
    for u in index.marks:
        if u not in want:
            changes[u] = "?"
    out.budget.updating = out.update_nodes(marks=changes)
    return out


# -- tracing ---------------------------------------------------------------------

def _split(pm: PowerMonoid, left: int, right: int, target: int) -> tuple[int, int]:
    """Smallest pair (m1, m2) from the two sets with m1 * m2 == target."""
    a = pm.elems(left)
    b = pm.elems(right)
    prod = pm.monoid.mul_many(np.repeat(a, len(b)), np.tile(b, len(a)))
    hit = np.flatnonzero(prod == target)
    if not len(hit):
        raise AssertionError("target is not a product of the children labels")
    k = int(hit[0])
    return int(a[k // len(b)]), int(b[k % len(b)])


def trace(index: Index) -> tuple[int, ...]:
    """Parameter nodes realizing an accepting root element.

    Raises ``NoConsistentParameters`` when no accepting element exists.
    """
    pm = index.pm
    mon = pm.monoid
    dec = index.dec
    root_path = dec.path_of[index.tree.root]
    finals = pm.final_elements(index.trees[root_path].label)
    if not len(finals):
        index.budget.tracing = 1
        raise NoConsistentParameters("the root label contains no accepting element")
    assigned: dict[int, int] = {}
    touches = 0
    outer = [(root_path, int(finals[0]))]
    while outer:
        path, target = outer.pop()
        nodes_bottom_up = dec.paths[path][::-1]
        inner: list[tuple[FNode, int]] = [(index.trees[path].root, target)]
        while inner:
            node, m = inner.pop()
            touches += 1
            if mon.params[m] == 0:
                continue
            if node.kind == LEAF:
                u = nodes_bottom_up[node.lo]
                cut = index.cutoff_label(u)
                found = pm.explain_letter(m, index.base_letter(u), cut, index.side[u])
                if found is None:
                    raise AssertionError(f"no letter explanation at node {u}")
                ymask, m_cut = found
                for i in range(mon.num_params):
                    if ymask >> i & 1:
                        assigned[i] = u
                if mon.params[m_cut]:
                    outer.append((dec.path_of[index.cut_child[u]], m_cut))
                continue
            if node.kind == IDEMPOTENT:
                _split_run(pm, node.children, node.label, m, inner)
                continue
            a, b = node.children
            m1, m2 = _split(pm, a.label, b.label, m)
            inner.append((b, m2))
            inner.append((a, m1))
    index.budget.tracing = touches
    if len(assigned) != mon.num_params:
        raise AssertionError("tracing left parameters unassigned")
    return tuple(assigned[i] for i in range(mon.num_params))


def _split_run(pm: PowerMonoid, kids: Sequence[FNode], e: int, target: int,
               inner: list) -> None:
    """Distribute a target over a run of children all labeled with idempotent e.

    Any product of copies of e is again e, so the run is cut in halves and
    each half is treated like one child labeled e.
    """
    stack = [(0, len(kids), target)]
    mon = pm.monoid
    while stack:
        lo, hi, m = stack.pop()
        if not mon.params[m]:
            continue
        if hi - lo == 1:
            inner.append((kids[lo], m))
            continue
        mid = (lo + hi) // 2
        m1, m2 = _split(pm, e, e, m)
        stack.append((mid, hi, m2))
        stack.append((lo, mid, m1))


# -- end-to-end ------------------------------------------------------------------

def alphabet_for(tree: LabeledTree, formula: Formula, extra: Iterable[str] = ()) -> tuple[str, ...]:
    labels = set(tree.labels) | set(extra) | _formula_labels(formula)
    return tuple(sorted(labels))


def _formula_labels(f: Formula) -> set[str]:
    if f[0] == "label":
        return {f[1]}
    out: set[str] = set()
    for g in f[1:]:
        if isinstance(g, tuple):
            out |= _formula_labels(g)
    return out


@lru_cache(maxsize=64)
def compiled(formula: Formula, alphabet: tuple[str, ...], mode: str,
             state_cap: int = DEFAULT_STATE_CAP) -> TreeAutomaton:
    return compile_psi(formula, alphabet, mode=mode, state_cap=state_cap)


def index_for(tree: LabeledTree, phi: Formula, kind: str = SIMON,
              alphabet: Iterable[str] = (), monoid_cap: int = DEFAULT_MONOID_CAP) -> Index:
    alpha = alphabet_for(tree, phi, alphabet)
    aut = compiled(phi, alpha, tree.mode)
    return build_index(tree, aut, kind, monoid_cap, phi, parameter_names(phi))


def verify(index: Index, params: Sequence[int], train: TrainingSet) -> bool:
    """Direct automaton run on the decorated tree."""
    tree = index.tree
    if index.labels:
        labels = [index.label_of(u) for u in range(tree.n)]
        tree = LabeledTree(labels, tree.left, tree.right, tree.mode)
    rho = run_dta(index.aut, tree, marks_of(train), params)
    return index.aut.accepts(int(rho[tree.root]))


def learn_parameters(tree: LabeledTree, phi: Formula, train: TrainingSet,
                     index: Index | None = None) -> Hypothesis:
    if index is None:
        index = index_for(tree, phi)
    trained = apply_training(index, train)
    params = trace(trained)
    if not verify(trained, params, train):
        raise AssertionError("traced parameters fail the direct check")
    return Hypothesis(phi, params, trained.param_names)


def learn_model(tree: LabeledTree, catalog: Sequence[Formula], train: TrainingSet,
                indexes: dict | None = None) -> Hypothesis:
    """First catalog formula that has consistent parameters."""
    if not catalog:
        raise ValueError("empty catalog")
    for phi in catalog:
        idx = None
        if indexes is not None:
            idx = indexes.get(phi)
            if idx is None:
                idx = indexes[phi] = index_for(tree, phi)
        try:
            return learn_parameters(tree, phi, train, idx)
        except NoConsistentParameters:
            continue
    raise NoConsistentHypothesis("no catalog formula is consistent with the training set")
