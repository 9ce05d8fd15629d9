"""A small worked instance used by tests, demos and the CLI documentation.

The 17-node ordered tree below carries node names ``u1..u17`` (names, not
preorder ids).  Every node has label ``a``.
"""

from __future__ import annotations

from .mso_compiler import parse_formula
from .tree_core import TrainingSet, parse_tree

SAMPLE_NAMES = ("u1", "u2", "u4", "u5", "u9", "u13", "u14", "u10", "u15", "u16",
                "u17", "u6", "u11", "u3", "u7", "u8", "u12")

SAMPLE_TERM = "(a (a (a) (a (a (a) (a)) (a (a) (a) (a))) (a (a))) (a (a) (a (a))))"

SAMPLE_EXAMPLES = (("u3", "-"), ("u4", "+"), ("u8", "-"), ("u10", "-"),
                   ("u13", "+"), ("u15", "+"))

# nodes at distance two from y
DISTANCE_TWO = "(and (exists z (and (E x z) (E z y))) (not (eq x y)))"
# x is a first child
FIRST_CHILD = "(exists z (E1 z x))"


def node_id(name: str) -> int:
    return SAMPLE_NAMES.index(name)


def node_name(u: int) -> str:
    return SAMPLE_NAMES[u]


def sample_tree():
    return parse_tree(SAMPLE_TERM, mode="unranked")


def sample_training() -> TrainingSet:
    return TrainingSet.of((node_id(n), c) for n, c in SAMPLE_EXAMPLES)


def sample_formulas():
    return parse_formula(DISTANCE_TWO), parse_formula(FIRST_CHILD)
