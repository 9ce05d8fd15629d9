import random
from math import comb

from treelearn.generators import (binary_shapes, full_binary_shapes, ordered_shapes,
                                  random_binary, random_full_binary, random_unranked,
                                  shape_to_tree, tree_from_children)
from treelearn.tree_core import ABSENT, BINARY, UNRANKED, format_tree, parse_tree


def catalan(n):
    return comb(2 * n, n) // (n + 1)


def test_shape_counts_are_catalan():
    assert [len(binary_shapes(n)) for n in range(1, 9)] == [catalan(n) for n in range(1, 9)]
    assert [len(full_binary_shapes(2 * k + 1)) for k in range(6)] == [catalan(k) for k in range(6)]
    assert [len(ordered_shapes(n)) for n in range(1, 9)] == [catalan(n - 1) for n in range(1, 9)]


def test_shapes_become_distinct_trees():
    for mode, shapes in ((BINARY, binary_shapes(5)), (UNRANKED, ordered_shapes(6))):
        terms = {format_tree(shape_to_tree(s, mode)) for s in shapes}
        assert len(terms) == len(shapes)


def test_children_lists_are_renumbered_in_preorder():
    t, mapping = tree_from_children("abc", [[], [2, 0], []], UNRANKED, root=1)
    assert format_tree(t) == format_tree(parse_tree("(b (c) (a))", mode=UNRANKED))
    assert mapping == [2, 0, 1]
    t, _ = tree_from_children("ab", [[ABSENT, 1], []], BINARY)
    assert t.left[0] == ABSENT and t.right[0] == 1


def test_random_families_have_the_requested_size():
    rng = random.Random(1)
    for n in (1, 2, 17, 300):
        assert random_binary(n, rng).n == n
        assert random_unranked(n, rng).n == n
        full = random_full_binary(n, rng)
        assert full.n == (n if n % 2 else n - 1)
        assert all((full.left[u] == ABSENT) == (full.right[u] == ABSENT) for u in range(full.n))
