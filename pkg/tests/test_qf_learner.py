import itertools
import random

import pytest

from treelearn.brute_oracle import Distinguishers, bf_qf_search, node_mask, qf_separable
from treelearn.generators import random_binary, random_unranked
from treelearn.mso_compiler import evaluate_query, parameter_names
from treelearn.mso_learner import NoConsistentHypothesis
from treelearn.qf_learner import (BOTTOM, gen_lemma3_tree, lca_closure, learn_qf, sufficient_set)
from treelearn.samples import node_id, sample_training, sample_tree
from treelearn.tree_core import BINARY, UNRANKED, OracleSession, TrainingSet, parse_tree

from conftest import random_training


def consistent(h, tree, train):
    names = parameter_names(h.formula)
    vals = [h.params[int(n[1:]) - 1] for n in names]
    accepted = evaluate_query(h.formula, tree, vals)
    return all((u in accepted) == (c == "+") for u, c in train)


def test_closure_of_one_node():
    t = sample_tree()
    assert lca_closure(OracleSession(t), TrainingSet.of([(3, "+")])) == {3}


def test_closure_of_two_siblings_adds_parent():
    t = parse_tree("(a (b) (c))")
    assert lca_closure(OracleSession(t), TrainingSet.of([(1, "+"), (2, "-")])) == {0, 1, 2}


def test_closure_on_sample():
    got = lca_closure(OracleSession(sample_tree()), sample_training())
    assert {node_id("u5"), node_id("u1")} <= got


def test_sufficient_set_of_a_leaf():
    t = parse_tree("(a (a (a) (a)) (a))")
    s = sufficient_set(OracleSession(t), TrainingSet.of([(2, "+")]))
    assert {2, 1, 0} <= s.nodes and s.multiplicity == 1
    assert sufficient_set(OracleSession(sample_tree()), sample_training()).multiplicity == 2


def test_sufficient_set_is_linear_in_examples():
    rng = random.Random(3)
    for _ in range(30):
        t = random_binary(rng.randint(50, 400), rng)
        s = random_training(rng, t.n, rng.randint(1, 10))
        got = sufficient_set(OracleSession(t), s)
        # closure has < 2|S| nodes, each contributes at most 1 + 3 + 3*3 nodes within two hops
        assert len(got.nodes) <= 13 * 2 * len(s)


def test_fixture_shape():
    t, s, named = gen_lemma3_tree(1, 0)
    assert len(s) == 2 and s.positives and s.negatives
    sizes = [gen_lemma3_tree(m, 2)[0].n for m in (10, 20, 40)]
    assert sizes[2] - sizes[1] == 2 * (sizes[1] - sizes[0])    # linear in m
    t, s, named = gen_lemma3_tree(5, 3)
    assert len(s.positives) == len(s.negatives) == 4
    assert named["v"] in sufficient_set(OracleSession(t), s).nodes


def test_fixture_separating_parameter_is_found():
    calls = set()
    for m in (3, 30, 300):
        t, s, named = gen_lemma3_tree(m, 1)
        session = OracleSession(t)
        h = learn_qf(session, s, 1)
        assert h.params == (named["v"],)
        assert consistent(h, t, s)
        calls.add(session.total_calls())
    assert len(calls) == 1


def test_all_positive_needs_no_parameters():
    t = sample_tree()
    h = learn_qf(OracleSession(t), TrainingSet.of([(1, "+"), (4, "+")]), 2)
    assert h.formula == ("true",) and all(v == BOTTOM for v in h.params)


def test_zero_parameters_can_still_use_labels():
    t = parse_tree("(a (b) (a))")
    h = learn_qf(OracleSession(t), TrainingSet.of([(1, "+"), (2, "-")]), 0)
    assert consistent(h, t, TrainingSet.of([(1, "+"), (2, "-")]))
    with pytest.raises(NoConsistentHypothesis):
        learn_qf(OracleSession(t), TrainingSet.of([(0, "+"), (2, "-")]), 0)


@pytest.mark.parametrize("mode", [BINARY, UNRANKED])
def test_learner_agrees_with_brute_force(mode):
    rng = random.Random(5 if mode == BINARY else 6)
    for _ in range(150):
        n = rng.randint(1, 12 if mode == BINARY else 9)
        t = random_binary(n, rng, ("a",)) if mode == BINARY else random_unranked(n, rng, ("a", "b"))
        s = random_training(rng, n, rng.randint(1, 4))
        ell = rng.randint(0, 2 if mode == BINARY else 1)
        slots = 2 * ell if mode == UNRANKED else ell
        try:
            h = learn_qf(OracleSession(t), s, ell)
        except NoConsistentHypothesis:
            h = None
        over_suff = bf_qf_search(t, s, ell, mode,
                                 candidates=sufficient_set(OracleSession(t), s).nodes)
        assert (h is not None) == (over_suff is not None)
        if h is not None:
            assert consistent(h, t, s)
        # the hitting-set shortcut and the explicit scan agree
        d = Distinguishers(t, mode)
        assert d.separable(s, slots) == (bf_qf_search(t, s, ell, mode) is not None)


def literal_pool(mode):
    heads = ["E1", "E2", "leq"] + (["sibleq"] if mode == UNRANKED else [])
    atoms = [(h, "x", "y1") for h in heads] + [(h, "y1", "x") for h in heads] + [("eq", "x", "y1")]
    return atoms + [("not", a) for a in atoms]


def test_failed_separation_defeats_small_formulas():
    rng = random.Random(8)
    pool = literal_pool(BINARY)
    small = pool + [(op, a, b) for op in ("and", "or") for a, b in itertools.combinations(pool, 2)]
    checked = 0
    for _ in range(40):
        t = random_binary(rng.randint(3, 8), rng, ("a",))
        s = random_training(rng, t.n, 4)
        v = rng.randrange(t.n)
        if qf_separable(t, s, (v,), BINARY):
            continue
        checked += 1
        for f in small:
            accepted = evaluate_query(f, t, [v])
            assert not all((u in accepted) == (c == "+") for u, c in s)
    assert checked > 0


def test_distinguisher_masks_respect_candidate_restriction():
    t = parse_tree("(a (a (a) (a)) (a (a) (a)))")
    d = Distinguishers(t)
    s = TrainingSet.of([(2, "+"), (5, "-")])
    assert d.separable(s, 1)
    assert not d.separable(s, 1, allowed=node_mask([0]))
