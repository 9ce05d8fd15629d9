"""Tree builders: from nested child lists, random families, exhaustive shapes."""

from __future__ import annotations

import random
from functools import lru_cache
from typing import Iterator, Sequence

from .tree_core import ABSENT, BINARY, UNRANKED, LabeledTree


def tree_from_children(labels: Sequence[str], children: Sequence[Sequence[int]],
                       mode: str, root: int = 0) -> tuple[LabeledTree, list[int]]:
    """Build a tree from arbitrary ids; returns it with the old->new id map.

    In binary mode each child list must have 0 or 2 entries, where ``-1``
    marks an absent slot.
    """
    order: list[int] = []
    stack = [root]
    while stack:
        u = stack.pop()
        order.append(u)
        for c in reversed(children[u]):
            if c != ABSENT:
                stack.append(c)
    new = {old: i for i, old in enumerate(order)}
    n = len(order)
    lab = [labels[old] for old in order]
    left = [ABSENT] * n
    right = [ABSENT] * n
    for old in order:
        u = new[old]
        ch = list(children[old])
        if mode == BINARY:
            if len(ch) not in (0, 2):
                raise ValueError("binary child lists need 0 or 2 slots")
            if ch:
                left[u] = new[ch[0]] if ch[0] != ABSENT else ABSENT
                right[u] = new[ch[1]] if ch[1] != ABSENT else ABSENT
        else:
            if ch:
                left[u] = new[ch[0]]
                for a, b in zip(ch, ch[1:]):
                    right[new[a]] = new[b]
    mapping = [0] * len(labels)
    for old, u in new.items():
        mapping[old] = u
    return LabeledTree(lab, left, right, mode), mapping


def _labels(n: int, rng: random.Random, alphabet: Sequence[str]) -> list[str]:
    return [rng.choice(alphabet) for _ in range(n)]


def random_full_binary(n: int, rng: random.Random, alphabet: Sequence[str] = ("a", "b"),
                       ) -> LabeledTree:
    """Random tree with ``n`` nodes (rounded down to odd) where every node has 0 or 2 children."""
    n = max(1, n if n % 2 else n - 1)
    left = [ABSENT] * n
    right = [ABSENT] * n
    # (node id, size) in preorder: the left subtree starts right after the node
    stack = [(0, n)]
    while stack:
        u, size = stack.pop()
        if size == 1:
            continue
        ls = 2 * rng.randrange((size - 1) // 2) + 1
        left[u] = u + 1
        right[u] = u + 1 + ls
        stack.append((u + 1 + ls, size - 1 - ls))
        stack.append((u + 1, ls))
    return LabeledTree(_labels(n, rng, alphabet), left, right, BINARY)


def random_binary(n: int, rng: random.Random, alphabet: Sequence[str] = ("a", "b"),
                  ) -> LabeledTree:
    """Random binary tree that may contain nodes with a single child."""
    left = [ABSENT] * n
    right = [ABSENT] * n
    stack = [(0, n)]
    while stack:
        u, size = stack.pop()
        if size == 1:
            continue
        ls = rng.randrange(size)
        rs = size - 1 - ls
        if ls:
            left[u] = u + 1
            stack.append((u + 1, ls))
        if rs:
            right[u] = u + 1 + ls
            stack.append((u + 1 + ls, rs))
    return LabeledTree(_labels(n, rng, alphabet), left, right, BINARY)


def random_unranked(n: int, rng: random.Random, alphabet: Sequence[str] = ("a", "b"),
                    ) -> LabeledTree:
    """Random ordered tree: each new node hangs off the current rightmost path."""
    children: list[list[int]] = [[] for _ in range(n)]
    path = [0]
    for u in range(1, n):
        k = rng.randrange(len(path))
        p = path[k]
        children[p].append(u)
        del path[k + 1:]
        path.append(u)
    tree, _ = tree_from_children(_labels(n, rng, alphabet), children, UNRANKED)
    return tree


def path_tree(n: int, label: str = "a") -> LabeledTree:
    left = [i + 1 if i + 1 < n else ABSENT for i in range(n)]
    return LabeledTree([label] * n, left, [ABSENT] * n, BINARY)


def complete_binary(depth: int, label: str = "a") -> LabeledTree:
    """Perfect binary tree with ``2**depth - 1`` nodes."""
    n = (1 << depth) - 1
    left = [ABSENT] * n
    right = [ABSENT] * n
    stack = [(0, n)]
    while stack:
        u, size = stack.pop()
        if size == 1:
            continue
        half = (size - 1) // 2
        left[u], right[u] = u + 1, u + 1 + half
        stack.append((u + 1, half))
        stack.append((u + 1 + half, half))
    return LabeledTree([label] * n, left, right, BINARY)


# -- exhaustive shapes ---------------------------------------------------------
# Shapes are nested tuples; a leaf is (), a binary node is (left, right) where
# an absent slot is None, an unranked node is a tuple of child shapes.

@lru_cache(maxsize=None)
def full_binary_shapes(n: int) -> tuple:
    if n == 1:
        return ((),)
    if n % 2 == 0:
        return ()
    out = []
    for ls in range(1, n - 1, 2):
        for a in full_binary_shapes(ls):
            for b in full_binary_shapes(n - 1 - ls):
                out.append((a, b))
    return tuple(out)


@lru_cache(maxsize=None)
def binary_shapes(n: int) -> tuple:
    """All binary shapes with optional left/right slots (Catalan many)."""
    if n == 0:
        return (None,)
    if n == 1:
        return ((),)
    out = []
    for ls in range(n):
        for a in binary_shapes(ls):
            for b in binary_shapes(n - 1 - ls):
                out.append((a, b))
    return tuple(out)


@lru_cache(maxsize=None)
def _forests(n: int) -> tuple:
    if n == 0:
        return ((),)
    out = []
    for first in range(1, n + 1):
        for t in ordered_shapes(first):
            for rest in _forests(n - first):
                out.append((t,) + rest)
    return tuple(out)


@lru_cache(maxsize=None)
def ordered_shapes(n: int) -> tuple:
    """All ordered (unranked) tree shapes with ``n`` nodes."""
    return tuple(_forests(n - 1))


def shape_to_tree(shape, mode: str, labels: Sequence[str] | None = None) -> LabeledTree:
    alloc: list[list[int]] = []
    stack = [(shape, None)]
    while stack:
        s, slot = stack.pop()
        u = len(alloc)
        alloc.append([])
        if slot is not None:
            alloc[slot[0]][slot[1]] = u
        if mode == BINARY:
            if s == ():
                continue
            alloc[u] = [ABSENT, ABSENT]
            a, b = s
            if b is not None:
                stack.append((b, (u, 1)))
            if a is not None:
                stack.append((a, (u, 0)))
        else:
            alloc[u] = [ABSENT] * len(s)
            for i in range(len(s) - 1, -1, -1):
                stack.append((s[i], (u, i)))
    labs = list(labels) if labels is not None else ["a"] * len(alloc)
    tree, _ = tree_from_children(labs, alloc, mode)
    return tree


def all_full_binary_trees(max_nodes: int) -> Iterator[LabeledTree]:
    for n in range(1, max_nodes + 1, 2):
        for s in full_binary_shapes(n):
            yield shape_to_tree(s, BINARY)


def all_ordered_trees(max_nodes: int) -> Iterator[LabeledTree]:
    for n in range(1, max_nodes + 1):
        for s in ordered_shapes(n):
            yield shape_to_tree(s, UNRANKED)


def relabel(tree: LabeledTree, labels: Sequence[str]) -> LabeledTree:
    return LabeledTree(labels, tree.left, tree.right, tree.mode)
