import itertools
import random

import pytest

from treelearn.automata import accepts
from treelearn.brute_oracle import (BudgetExceeded, bf_consistent, bf_qf_search, bf_search,
                                    classification_matrix, matrix_search, qf_separable,
                                    relation_row, tuple_of_row)
from treelearn.generators import binary_shapes, random_binary, shape_to_tree
from treelearn.mso_compiler import brute_eval, compile_query, evaluate_query, parse_formula
from treelearn.mso_learner import compiled
from treelearn.samples import node_id, sample_formulas, sample_training, sample_tree
from treelearn.tree_core import BINARY, UNRANKED, TrainingSet, parse_tree

from conftest import all_training_sets

PHI = parse_formula("(or (E1 y x) (eq x y))")


def test_sample_parameter_is_consistent():
    t = sample_tree()
    aut = compiled(sample_formulas()[0], ("a",), t.mode)
    assert bf_consistent(t, aut, (node_id("u5"),), sample_training())
    assert bf_search(t, aut, sample_training(), 1) == (node_id("u5"),)


def test_consistency_matches_direct_evaluation():
    aut = compiled(PHI, ("a",), BINARY)
    for n in range(1, 5):
        for shape in binary_shapes(n):
            t = shape_to_tree(shape, BINARY)
            for s in all_training_sets(range(n), 2):
                for v in range(n):
                    want = all(brute_eval(PHI, t, {"x": u, "y": v}) == (c == "+") for u, c in s)
                    assert bf_consistent(t, aut, (v,), s) == want


def test_matrix_route_agrees_with_direct_search():
    rng = random.Random(31)
    query = compile_query(PHI, ("a",), mode=BINARY)
    aut = compiled(PHI, ("a",), BINARY)
    for _ in range(20):
        t = random_binary(rng.randint(1, 8), rng, ("a",))
        m = classification_matrix(t, query, 1)
        for s in itertools.islice(all_training_sets(range(t.n), 2), 40):
            row = matrix_search(m, s)
            got = None if row is None else tuple_of_row(row, t.n, 1)
            assert got == bf_search(t, aut, s, 1)


def test_tuple_rows_are_lexicographic():
    rows = [tuple_of_row(r, 3, 2) for r in range(9)]
    assert rows == list(itertools.product(range(3), repeat=2))


def test_budget_guard():
    t = sample_tree()
    aut = compiled(sample_formulas()[0], ("a",), t.mode)
    with pytest.raises(BudgetExceeded):
        bf_search(t, aut, sample_training(), 3, budget=1000)


def test_relation_rows():
    t = parse_tree("(a (a) (a))", mode=UNRANKED)
    # node 1 is the first child of 0 and the previous sibling of 2
    assert relation_row(t, 1, 0, UNRANKED) == (False, True, False, False, False, True, False, False, False)
    assert relation_row(t, 1, 2, UNRANKED)[2] and relation_row(t, 1, 2, UNRANKED)[6]
    assert relation_row(t, 1, 1, UNRANKED)[-1]
    assert not relation_row(t, 1, 2, UNRANKED)[-1]


def test_qf_search_result_is_separable():
    rng = random.Random(32)
    for _ in range(50):
        t = random_binary(rng.randint(1, 9), rng, ("a", "b"))
        s = TrainingSet.of((u, rng.choice("+-")) for u in rng.sample(range(t.n), min(3, t.n)))
        got = bf_qf_search(t, s, 1, BINARY)
        if got is not None:
            assert qf_separable(t, s, got, BINARY)
