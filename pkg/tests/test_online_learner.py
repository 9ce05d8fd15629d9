import random

import pytest

from treelearn.brute_oracle import bf_consistent, bf_search
from treelearn.generators import random_binary
from treelearn.mso_compiler import parse_formula
from treelearn.mso_learner import apply_training, build_index, compiled
from treelearn.online_learner import (NotRealizable, current_tree, online_add, online_batch,
                                      online_init, online_relabel)
from treelearn.samples import node_id, sample_formulas, sample_training, sample_tree
from treelearn.tree_core import BINARY, TrainingSet

from conftest import random_training

ALPHA = ("a", "b")
DESC = parse_formula("(and (leq y x) (not (eq x y)))")


def elements(idx):
    return set(idx.pm.elems(idx.root_label).tolist())


def test_sample_stream_ends_on_the_only_parameter():
    t = sample_tree()
    phi, _ = sample_formulas()
    aut = compiled(phi, ("a",), t.mode)
    state = online_init(t, aut, phi, ("y",))
    hyps = online_batch(state, sample_training())
    assert hyps[-1].params == (node_id("u5"),)
    assert len(state.history) == len(sample_training())


def test_bad_updates_are_rejected():
    t = sample_tree()
    aut = compiled(sample_formulas()[0], ("a",), t.mode)
    state = online_init(t, aut)
    online_add(state, (1, "+"))
    with pytest.raises(ValueError):
        online_add(state, (1, "-"))
    with pytest.raises(ValueError):
        online_add(state, (t.n, "+"))
    with pytest.raises(ValueError):
        online_relabel(state, -1, "a")
    # repeating an example is harmless
    assert online_add(state, (1, "+")) is not None


def test_unrealizable_stream_reports_and_recovers_through_relabel():
    t = random_binary(1, random.Random(0), ALPHA)
    aut = compiled(parse_formula("(label a x)"), ALPHA, BINARY)
    state = online_init(t, aut)
    online_relabel(state, 0, "b")
    with pytest.raises(NotRealizable):
        online_add(state, (0, "+"))
    assert state.current is None
    assert online_relabel(state, 0, "a") is not None


def test_random_orders_match_a_rebuild():
    rng = random.Random(21)
    aut = compiled(DESC, ALPHA, BINARY)
    for _ in range(8):
        t = random_binary(rng.randint(5, 120), rng, ALPHA)
        full = random_training(rng, t.n, 6)
        order = list(full)
        rng.shuffle(order)
        state = online_init(t, aut)
        seen = []
        for ex in order:
            seen.append(ex)
            want = bf_search(t, aut, TrainingSet.of(seen), 1)
            try:
                h = online_add(state, ex)
            except NotRealizable:
                assert want is None
                break
            assert want is not None and bf_consistent(t, aut, h.params, TrainingSet.of(seen))
        rebuilt = apply_training(build_index(t, aut), TrainingSet.of(seen))
        assert elements(state.index) == elements(rebuilt)


def test_relabels_match_a_rebuild():
    rng = random.Random(22)
    aut = compiled(parse_formula("(and (label b y) (leq y x))"), ALPHA, BINARY)
    t = random_binary(60, rng, ALPHA)
    state = online_init(t, aut)
    s = random_training(rng, t.n, 3)
    for ex in s:
        try:
            online_add(state, ex)
        except NotRealizable:
            pass
    for _ in range(15):
        try:
            online_relabel(state, rng.randrange(t.n), rng.choice(ALPHA))
        except NotRealizable:
            pass
        now = current_tree(state)
        rebuilt = apply_training(build_index(now, aut), state.seen)
        assert elements(state.index) == elements(rebuilt)
        assert (state.current is None) == (bf_search(now, aut, state.seen, 1) is None)
