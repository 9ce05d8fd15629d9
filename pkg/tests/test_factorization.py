import random

import pytest
from hypothesis import given, settings, strategies as st

from treelearn.factorization import (IDEMPOTENT, Counter, DuplicateUpdate, audit, binary_height,
                                     build_binary, build_simon, certify_height, update_binary,
                                     update_simon)
from treelearn.monoid import PowerMonoid, TransitionMonoid
from treelearn.mso_compiler import parse_formula
from treelearn.mso_learner import compiled
from treelearn.samples import sample_formulas
from treelearn.tree_core import BINARY, UNRANKED


def _setup(aut, seed=0):
    pm = PowerMonoid(TransitionMonoid(aut))
    rng = random.Random(seed)
    sig = aut.sigma
    pool = [pm.hat_h(sig.index(lab, mk, 0), pm.one, side)
            for lab in sig.labels for mk in "?NP" for side in "LR"]
    for _ in range(20):
        pool.append(pm.mul(rng.choice(pool), rng.choice(pool)))
    return pm, sorted(set(pool))


@pytest.fixture(scope="module", params=["unranked-sample", "binary-descendant"])
def setup(request):
    if request.param == "unranked-sample":
        aut = compiled(sample_formulas()[0], ("a",), UNRANKED)
    else:
        aut = compiled(parse_formula("(leq y x)"), ("a", "b"), BINARY)
    return _setup(aut)


def sequences(pool_size):
    letter = st.integers(0, pool_size - 1)
    plain = st.lists(letter, min_size=1, max_size=400)
    periodic = st.tuples(st.lists(letter, min_size=1, max_size=4), st.integers(1, 600)).map(
        lambda t: [t[0][i % len(t[0])] for i in range(t[1])])
    blocks = st.lists(st.tuples(letter, st.integers(1, 40)), min_size=1, max_size=30).map(
        lambda bs: [x for x, k in bs for _ in range(k)])
    return st.one_of(plain, periodic, blocks)


@settings(max_examples=150, deadline=None)
@given(data=st.data())
def test_simon_tree_evaluates_and_is_well_formed(setup, data):
    pm, pool = setup
    seq = [pool[i] for i in data.draw(sequences(len(pool)))]
    t = build_simon(seq, pm)
    assert t.label == pm.product(seq)
    assert t.leaf_labels() == seq
    assert audit(t) == []
    assert certify_height(t)


@settings(max_examples=120, deadline=None)
@given(data=st.data())
def test_updates_match_rebuild(setup, data):
    pm, pool = setup
    seq = [pool[i] for i in data.draw(sequences(len(pool)))]
    t = build_simon(seq, pm)
    b = build_binary(seq, pm)
    n = len(seq)
    positions = data.draw(st.lists(st.integers(0, n - 1), unique=True, max_size=min(n, 8)))
    ups = {p: pool[data.draw(st.integers(0, len(pool) - 1))] for p in positions}
    new = list(seq)
    for p, x in ups.items():
        new[p] = x
    t2 = update_simon(t, ups)
    b2 = update_binary(b, ups)
    assert t2.leaf_labels() == new and t2.label == pm.product(new)
    assert audit(t2) == []
    assert certify_height(t2, slack=2 * t.height)
    assert b2.label == t2.label and b2.height == b.height == binary_height(n)
    # persistence: the old trees are untouched
    assert t.leaf_labels() == seq and b.leaf_labels() == seq


def test_uniform_idempotent_run_is_flat(setup):
    pm, pool = setup
    e = next(x for x in pool if pm.is_idempotent(x))
    t = build_simon([e] * 500, pm)
    assert t.root.kind == IDEMPOTENT or t.height <= 3


def test_binary_height_formula():
    assert [binary_height(n) for n in (1, 2, 3, 4, 5, 1024, 1025)] == [1, 2, 3, 3, 4, 11, 12]


def test_update_touches_stay_local(setup):
    pm, pool = setup
    rng = random.Random(7)
    seq = [rng.choice(pool) for _ in range(4096)]
    b = build_binary(seq, pm)
    ctr = Counter()
    update_binary(b, {100: pool[0]}, ctr)
    assert ctr.touched <= 2 * binary_height(4096)


def test_bad_updates_rejected(setup):
    pm, pool = setup
    t = build_simon(pool[:3], pm)
    with pytest.raises(IndexError):
        update_simon(t, {5: pool[0]})
    with pytest.raises(DuplicateUpdate):
        update_simon(t, [(1, pool[0]), (1, pool[1])])
