"""Heavy path decomposition of the binary (E1/E2) view of a tree."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .tree_core import ABSENT, LabeledTree


@dataclass(frozen=True)
class HeavyPathDecomposition:
    paths: tuple[tuple[int, ...], ...]   # each top-down, ending at a leaf
    path_of: tuple[int, ...]
    pos_in_path: tuple[int, ...]         # index of a node in its top-down path
    subtree_size: tuple[int, ...]
    heavy: tuple[int, ...]               # heavy child or ABSENT
    topo_order: tuple[int, ...]          # dependencies before dependents
    parent: tuple[int, ...]              # binary parent

    def __len__(self) -> int:
        return len(self.paths)

    def cutoff_child(self, u: int, tree: LabeledTree) -> int | None:
        for c in (tree.left[u], tree.right[u]):
            if c != ABSENT and c != self.heavy[u]:
                return c
        return None

    def dependencies(self, i: int, tree: LabeledTree) -> list[int]:
        """Paths whose tops are cut-off children of nodes on path ``i``."""
        out = []
        for u in self.paths[i]:
            c = self.cutoff_child(u, tree)
            if c is not None:
                out.append(self.path_of[c])
        return out


def decompose(tree: LabeledTree) -> HeavyPathDecomposition:
    """Follow, from every path top, the leftmost child of maximal subtree size."""
    n = tree.n
    size = tree.bsize
    heavy = [ABSENT] * n
    for u in range(n):
        best = ABSENT
        for c in (tree.left[u], tree.right[u]):
            if c != ABSENT and (best == ABSENT or size[c] > size[best]):
                best = c
        heavy[u] = best
    path_of = [0] * n
    pos = [0] * n
    paths: list[tuple[int, ...]] = []
    bparent = tree.bparent
    for u in range(n):
        p = bparent[u]
        if p != ABSENT and heavy[p] == u:
            continue
        # u is a path top; preorder visits tops in increasing id order
        idx = len(paths)
        nodes = []
        v = u
        while v != ABSENT:
            path_of[v] = idx
            pos[v] = len(nodes)
            nodes.append(v)
            v = heavy[v]
        paths.append(tuple(nodes))
    # a dependent path's top has a larger id than any node that cuts it off
    topo = tuple(range(len(paths) - 1, -1, -1))
    return HeavyPathDecomposition(tuple(paths), tuple(path_of), tuple(pos), tuple(size),
                                  tuple(heavy), topo, bparent)


def cutoff_child(dec: HeavyPathDecomposition, tree: LabeledTree, u: int) -> int | None:
    return dec.cutoff_child(u, tree)


def root_path_intersections(dec: HeavyPathDecomposition, u: int) -> int:
    """Number of distinct heavy paths met on the way from the root to ``u``."""
    count = 0
    v = u
    while v != ABSENT:
        count += 1
        top = dec.paths[dec.path_of[v]][0]
        v = dec.parent[top]
    return count


def intersection_bound(n: int) -> int:
    return math.ceil(math.log2(n)) + 1 if n > 1 else 1


def format_decomposition(dec: HeavyPathDecomposition) -> str:
    return "".join(" ".join(map(str, p)) + "\n" for p in dec.paths)
