"""Online parameter learning: examples and label changes arrive one at a time.

The index uses fixed-shape balanced factorization trees, so an update only
relabels the tree nodes above the changed leaf.  After each update the
parameters are traced again from the root.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

from .automata import TreeAutomaton
from .factorization import BINARY_KIND
from .mso_learner import (Hypothesis, Index, NoConsistentParameters, build_index, trace,
                          verify)
from .mso_compiler import Formula
from .tree_core import LabeledTree, TrainingSet


class NotRealizable(Exception):
    """No parameter setting is consistent with the examples seen so far."""


@dataclass
class OnlineState:
    index: Index
    seen: TrainingSet = field(default_factory=TrainingSet)
    current: Hypothesis | None = None
    last_touches: int = 0
    history: list = field(default_factory=list)
    # replay the automaton after each update (linear time; off for timing runs)
    check: bool = True

    @property
    def root_label(self) -> int:
        return self.index.root_label


def online_init(tree: LabeledTree, aut: TreeAutomaton, formula: Formula | None = None,
                param_names: Iterable[str] = (), check: bool = True) -> OnlineState:
    idx = build_index(tree, aut, kind=BINARY_KIND, formula=formula,
                      param_names=tuple(param_names))
    return OnlineState(idx, check=check)


def _refresh(state: OnlineState, touched: int) -> Hypothesis:
    idx = state.index
    try:
        params = trace(idx)
    except NoConsistentParameters:
        state.current = None
        state.last_touches = touched + idx.budget.tracing
        state.history.append(state.last_touches)
        raise NotRealizable("no consistent parameters for the examples so far") from None
    if state.check and not verify(idx, params, state.seen):
        raise AssertionError("traced parameters fail the direct check")
    state.current = Hypothesis(idx.formula, params, idx.param_names)
    state.last_touches = touched + idx.budget.tracing
    state.history.append(state.last_touches)
    return state.current


def online_add(state: OnlineState, example: tuple[int, str]) -> Hypothesis:
    """Add one example; raises ``NotRealizable`` when no hypothesis fits any more."""
    u, c = int(example[0]), example[1]
    if not 0 <= u < state.index.tree.n:
        raise ValueError(f"node {u} is not in the tree")
    old = dict(state.seen.examples)
    if old.get(u, c) != c:
        raise ValueError(f"node {u} already has the opposite polarity")
    state.seen = state.seen.add(u, c)
    touched = state.index.update_nodes(marks={u: "P" if c == "+" else "N"})
    return _refresh(state, touched)


def online_relabel(state: OnlineState, u: int, label: str) -> Hypothesis:
    if not 0 <= u < state.index.tree.n:
        raise ValueError(f"node {u} is not in the tree")
    touched = state.index.update_nodes(labels={u: label})
    return _refresh(state, touched)


def online_batch(state: OnlineState, examples: Iterable[tuple[int, str]]) -> list[Hypothesis]:
    return [online_add(state, e) for e in examples]


def current_tree(state: OnlineState) -> LabeledTree:
    """The tree with all label changes applied."""
    idx = state.index
    t = idx.tree
    labels = [idx.label_of(u) for u in range(t.n)]
    return LabeledTree(labels, t.left, t.right, t.mode)
