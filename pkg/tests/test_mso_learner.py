import random

import pytest

from treelearn.brute_oracle import bf_consistent, bf_search
from treelearn.factorization import BINARY_KIND
from treelearn.generators import random_binary
from treelearn.mso_compiler import parameter_names, parse_formula
from treelearn.mso_learner import (NoConsistentHypothesis, NoConsistentParameters, apply_training,
                                   build_index, compiled, index_for, learn_model, learn_parameters,
                                   trace)
from treelearn.samples import node_id, sample_formulas, sample_training, sample_tree
from treelearn.tree_core import BINARY, TrainingSet, parse_tree

from conftest import random_training

SUITE = ["(and (exists z (and (E x z) (E z y))) (not (eq x y)))",
         "(and (leq y x) (not (eq x y)))",
         "(and (label a x) (exists z (and (E1 x z) (label b z))))",
         "(or (eq x y1) (exists z (and (E2 z x) (leq y2 z))))",
         "(forall z (implies (leq x z) (not (eq z y))))"]
ALPHA = ("a", "b")


def test_single_node_index():
    t = parse_tree("(a)")
    idx = index_for(t, parse_formula("(leq y x)"))
    assert len(idx.dec.paths) == 1
    assert idx.trees[0].root.kind == "leaf"


def test_sample_instance_finds_the_only_parameter():
    t = sample_tree()
    phi, _ = sample_formulas()
    h = learn_parameters(t, phi, sample_training())
    assert h.params == (node_id("u5"),)


def test_sample_instance_without_examples_is_consistent():
    t = sample_tree()
    phi, _ = sample_formulas()
    idx = index_for(t, phi)
    assert idx.consistent()
    assert apply_training(idx, TrainingSet()).root_label == idx.root_label


def test_contradictory_requirements_have_no_parameters():
    t = sample_tree()
    phi, _ = sample_formulas()
    # no candidate fits all three; the brute force is the ground truth
    s = TrainingSet.of([(node_id("u4"), "+"), (node_id("u6"), "-"), (node_id("u1"), "-")])
    aut = compiled(phi, ("a",), t.mode)
    assert bf_search(t, aut, s, 1) is None
    with pytest.raises(NoConsistentParameters):
        learn_parameters(t, phi, s)


def test_empty_parameter_list():
    t = parse_tree("(a (b) (a))")
    phi = parse_formula("(label a x)")
    idx = index_for(t, phi)
    assert trace(apply_training(idx, TrainingSet.of([(0, "+"), (2, "+")]))) == ()
    with pytest.raises(NoConsistentParameters):
        trace(apply_training(idx, TrainingSet.of([(1, "+")])))


@pytest.mark.parametrize("text", SUITE)
def test_trace_agrees_with_brute_force(text):
    rng = random.Random(SUITE.index(text))
    phi = parse_formula(text)
    ell = len(parameter_names(phi))
    aut = compiled(phi, ALPHA, BINARY)
    for _ in range(60):
        t = random_binary(rng.randint(1, 60 if ell < 2 else 25), rng, ALPHA)
        s = random_training(rng, t.n, rng.randint(0, 5))
        idx = build_index(t, aut)
        trained = apply_training(idx, s)
        witness = bf_search(t, aut, s, ell)
        try:
            params = trace(trained)
        except NoConsistentParameters:
            assert witness is None
            continue
        assert witness is not None
        assert bf_consistent(t, aut, params, s)


def elements(idx):
    return set(idx.pm.elems(idx.root_label).tolist())


def test_index_is_reusable_across_training_sets():
    rng = random.Random(11)
    phi = parse_formula(SUITE[1])
    aut = compiled(phi, ALPHA, BINARY)
    t = random_binary(80, rng, ALPHA)
    shared = build_index(t, aut)
    for _ in range(20):
        s = random_training(rng, t.n, rng.randint(0, 6))
        a = apply_training(shared, s)
        b = apply_training(build_index(t, aut), s)
        assert elements(a) == elements(b)
        if a.consistent():
            assert trace(a) == trace(b)
    # the shared index itself never changes
    assert shared.marks == {}


def test_training_can_be_replaced_on_a_trained_index():
    rng = random.Random(12)
    aut = compiled(parse_formula(SUITE[0]), ALPHA, BINARY)
    t = random_binary(50, rng, ALPHA)
    idx = build_index(t, aut)
    s1, s2 = random_training(rng, t.n, 4), random_training(rng, t.n, 4)
    assert elements(apply_training(apply_training(idx, s1), s2)) == elements(apply_training(idx, s2))


def test_binary_kind_index_has_the_same_root_label():
    rng = random.Random(13)
    aut = compiled(parse_formula(SUITE[3]), ALPHA, BINARY)
    for _ in range(10):
        t = random_binary(rng.randint(1, 200), rng, ALPHA)
        a = build_index(t, aut)
        b = build_index(t, aut, kind=BINARY_KIND)
        assert elements(a) == elements(b)


def test_model_learning_over_catalogs():
    t = sample_tree()
    s = sample_training()
    _, psi = sample_formulas()
    h = learn_model(t, [("true",)], TrainingSet.of([(0, "+"), (3, "+")]))
    assert h.formula == ("true",) and h.params == ()
    assert learn_model(t, [psi], s).formula == psi
    # neither formula fits: u3 is negative but u2 is positive
    never = [parse_formula("(label a x)"), parse_formula("(leq y x)")]
    bad = TrainingSet.of([(node_id("u2"), "+"), (node_id("u3"), "-"), (node_id("u1"), "+"),
                          (node_id("u4"), "-")])
    for phi in never:
        aut = compiled(phi, ("a",), t.mode)
        assert bf_search(t, aut, bad, len(parameter_names(phi))) is None
    with pytest.raises(NoConsistentHypothesis):
        learn_model(t, never, bad)


def test_catalog_must_not_be_empty():
    with pytest.raises(ValueError):
        learn_model(sample_tree(), [], sample_training())


def test_learning_touches_grow_with_examples_not_tree_size():
    rng = random.Random(14)
    aut = compiled(parse_formula(SUITE[1]), ALPHA, BINARY)
    small, big = random_binary(1000, rng, ALPHA), random_binary(16000, rng, ALPHA)
    costs = []
    for t in (small, big):
        idx = build_index(t, aut)
        s = random_training(rng, t.n, 10)
        costs.append(apply_training(idx, s).budget.updating)
    # sixteen times the nodes, far less than sixteen times the work
    assert costs[1] < 4 * costs[0]
