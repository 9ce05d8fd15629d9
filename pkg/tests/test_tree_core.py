import random

import pytest
from hypothesis import given, settings, strategies as st

from treelearn.generators import random_binary, random_unranked
from treelearn.samples import node_id, sample_tree
from treelearn.tree_core import (ABSENT, BINARY, UNRANKED, EulerLCA, LabeledTree, OracleSession,
                                 TrainingSet, TreeSyntaxError, format_training, format_tree,
                                 parse_training, parse_tree)


def naive_lca(t, u, v):
    anc = set()
    while u != ABSENT:
        anc.add(u)
        u = t.parent[u]
    while v not in anc:
        v = t.parent[v]
    return v


def test_parse_binary_term():
    t = parse_tree("(a (b) (c (d) -))")
    assert t.mode == BINARY
    assert t.labels == ("a", "b", "c", "d")
    assert t.left[0] == 1 and t.right[0] == 2
    assert t.left[2] == 3 and t.right[2] == ABSENT
    assert t.children(0) == [1, 2]


def test_parse_unranked_term():
    t = parse_tree("(a (b) (c) (d))")
    assert t.mode == UNRANKED
    assert t.children(0) == [1, 2, 3]
    # first child / next sibling encoding
    assert t.left[0] == 1 and t.right[1] == 2 and t.right[2] == 3
    assert t.parent[3] == 0


def test_single_node():
    t = parse_tree("(a)")
    assert t.n == 1 and t.children(0) == []


@pytest.mark.parametrize("text", ["(a", "a)", "(a (b) (c)) (d)", "()", "(a (b) -) x", ""])
def test_syntax_errors_carry_offsets(text):
    with pytest.raises(TreeSyntaxError) as exc:
        parse_tree(text, mode="binary")
    assert exc.value.offset >= 0


def test_malformed_pointer_arrays_rejected():
    with pytest.raises(ValueError):
        LabeledTree(["a", "b"], [1, ABSENT], [1, ABSENT])       # two pointers into node 1
    with pytest.raises(ValueError):
        LabeledTree(["a", "b"], [ABSENT, ABSENT], [ABSENT, ABSENT])  # disconnected
    with pytest.raises(ValueError):
        LabeledTree(["a", "b"], [ABSENT, ABSENT], [1, ABSENT], UNRANKED)  # root with sibling


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 40), st.integers(0, 10**6), st.booleans())
def test_format_parse_roundtrip(n, seed, unranked):
    rng = random.Random(seed)
    t = random_unranked(n, rng) if unranked else random_binary(n, rng)
    back = parse_tree(format_tree(t), t.mode)
    assert (back.labels, back.left, back.right) == (t.labels, t.left, t.right)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 60), st.integers(0, 10**6), st.booleans())
def test_euler_lca_matches_parent_walk(n, seed, unranked):
    rng = random.Random(seed)
    t = random_unranked(n, rng) if unranked else random_binary(n, rng)
    lca = EulerLCA(t)
    for _ in range(30):
        u, v = rng.randrange(n), rng.randrange(n)
        assert lca.query(u, v) == naive_lca(t, u, v)


def test_ancestor_and_sibling_relations():
    t = sample_tree()
    u1, u2, u5, u13, u3 = (node_id(x) for x in ("u1", "u2", "u5", "u13", "u3"))
    assert t.is_ancestor(u1, u13) and t.is_ancestor(u5, u13)
    assert not t.is_ancestor(u3, u13)
    assert t.is_ancestor(u2, u2)
    assert t.sibling_leq(u2, u3) and not t.sibling_leq(u3, u2)


def test_training_set_rules():
    s = TrainingSet.of([(1, "+"), (2, "-"), (1, "+")])
    assert len(s) == 2 and s.positives == [1] and s.negatives == [2]
    with pytest.raises(ValueError):
        TrainingSet.of([(1, "+"), (1, "-")])
    with pytest.raises(ValueError):
        TrainingSet.of([(1, "x")])
    text = format_training(s)
    assert parse_training(text) == s
    with pytest.raises(TreeSyntaxError):
        parse_training("3 +\nfoo\n")


def test_oracle_counts_calls():
    t = sample_tree()
    s = OracleSession(t)
    s.neighborhood(0)
    s.relation("E1", (0, 1))
    s.relation("<=", (0, 5))
    s.lca(4, 6)
    assert s.counters == {"neighborhood": 1, "relation": 2, "lca": 1}
    assert s.total_calls() == 4
    s.reset()
    assert s.total_calls() == 0


def test_unranked_neighborhood_has_siblings_and_parent():
    t = sample_tree()
    s = OracleSession(t)
    u4 = node_id("u4")
    got = s.neighborhood(u4)
    # u4 is the first child of u2, its right sibling is u5
    assert {node_id("u2"), node_id("u5"), u4} <= got


def test_local_only_session_refuses_lca():
    s = OracleSession(sample_tree(), with_lca=False)
    with pytest.raises(RuntimeError):
        s.lca(0, 1)
