"""Factorization trees over sequences of powerset-monoid elements.

A node is a leaf, a binary node, or an idempotent node whose children all
carry the same idempotent label.  Every inner label is the product of the
children's labels.  Two kinds are built here:

* Simon trees.  When the letters of the sequence generate a subsemigroup
  ``S`` that is so small that a balanced tree could be taller than
  ``3 |S|``, the tree follows the Green's relations of ``S``.  The word is
  first cut where prefix values fall to a lower J-class.  Inside one J-class,
  cuts between two positions of the same H-class enclose group elements.
  Inside a group, repeated prefix values enclose factors equal to the
  identity, which become idempotent nodes.  Otherwise the balanced binary
  tree already meets the bound and is used.
* Binary trees: balanced, with a shape that label updates never change.

Updates copy the nodes on the root-ward paths of the changed leaves, so older
trees stay valid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .monoid import PowerMonoid

LEAF, BINARY_NODE, IDEMPOTENT = "leaf", "binary", "idempotent"
SIMON, BINARY_KIND = "simon", "binary"


class DuplicateUpdate(ValueError):
    pass


class FNode:
    __slots__ = ("label", "kind", "children", "height", "lo", "hi")

    def __init__(self, label: int, kind: str, children: tuple, lo: int, hi: int):
        self.label = label
        self.kind = kind
        self.children = children
        self.lo = lo
        self.hi = hi
        self.height = 1 + max((c.height for c in children), default=0)

    def __repr__(self) -> str:
        return f"FNode({self.kind}, label={self.label}, span=[{self.lo},{self.hi}))"


@dataclass
class Counter:
    touched: int = 0


@dataclass
class FactorizationTree:
    kind: str
    root: FNode
    length: int
    pm: PowerMonoid = field(repr=False)
    letters: dict = field(default_factory=dict, repr=False)    # leaf label -> count

    @property
    def label(self) -> int:
        return self.root.label

    @property
    def height(self) -> int:
        return self.root.height

    def leaves(self) -> list[FNode]:
        out: list[FNode] = []
        stack = [self.root]
        while stack:
            node = stack.pop()
            if node.kind == LEAF:
                out.append(node)
            else:
                stack.extend(reversed(node.children))
        return out

    def leaf_labels(self) -> list[int]:
        return [leaf.label for leaf in self.leaves()]

    def semigroup_size(self, cap: int | None = None) -> int:
        """Size of the subsemigroup generated by the leaf labels.

        With ``cap`` the count stops early; a result equal to ``cap`` means
        "at least ``cap``", which suffices to certify a height bound.
        """
        return len(generated_semigroup(self.pm, self.letters, cap))

    def node_count(self) -> int:
        count = 0
        stack = [self.root]
        while stack:
            node = stack.pop()
            count += 1
            stack.extend(node.children)
        return count


# -- helpers ------------------------------------------------------------------

def _leaf(label: int, i: int, ctr: Counter) -> FNode:
    ctr.touched += 1
    return FNode(label, LEAF, (), i, i + 1)


def _binary(pm: PowerMonoid, a: FNode, b: FNode, ctr: Counter) -> FNode:
    ctr.touched += 1
    return FNode(pm.mul(a.label, b.label), BINARY_NODE, (a, b), a.lo, b.hi)


def _idempotent(e: int, kids: Sequence[FNode], ctr: Counter) -> FNode:
    ctr.touched += 1
    return FNode(e, IDEMPOTENT, tuple(kids), kids[0].lo, kids[-1].hi)


def _balanced(pm: PowerMonoid, nodes: Sequence[FNode], ctr: Counter) -> FNode:
    if len(nodes) == 1:
        return nodes[0]
    mid = (len(nodes) + 1) // 2
    return _binary(pm, _balanced(pm, nodes[:mid], ctr), _balanced(pm, nodes[mid:], ctr), ctr)


def generated_semigroup(pm: PowerMonoid, letters, cap: int | None = None) -> list[int]:
    """Elements of the subsemigroup generated by ``letters`` (stops at ``cap``)."""
    gens = list(dict.fromkeys(letters))
    seen = dict.fromkeys(gens)
    frontier = list(gens)
    while frontier:
        if cap is not None and len(seen) >= cap:
            break
        new = []
        for x in frontier:
            for g in gens:
                y = pm.mul(x, g)
                if y not in seen:
                    seen[y] = None
                    new.append(y)
        frontier = new
    return list(seen)


def binary_height(n: int) -> int:
    return math.ceil(math.log2(n)) + 1 if n > 1 else 1


def simon_threshold(n: int) -> int:
    """Semigroup size from which a balanced tree meets the ``3|S|`` bound."""
    return -(-binary_height(n) // 3)


class GreenStructure:
    """Green's relations of a small semigroup given by its elements."""

    def __init__(self, pm: PowerMonoid, elems: Sequence[int]):
        self.pm = pm
        self.elems = list(elems)
        idx = {e: i for i, e in enumerate(self.elems)}
        k = len(self.elems)
        self.table = [[idx[pm.mul(a, b)] for b in self.elems] for a in self.elems]
        right = [frozenset([i] + self.table[i]) for i in range(k)]        # x S^1
        left = [frozenset([i] + [self.table[j][i] for j in range(k)]) for i in range(k)]
        two = [frozenset(x for r in right[i] for x in left[r]) for i in range(k)]
        self.r_class = _class_ids(right)
        self.l_class = _class_ids(left)
        self.j_class = _class_ids(two)
        self.ideal = two
        self.index = idx

    def mul(self, i: int, j: int) -> int:
        return self.table[i][j]

    def in_j(self, i: int, j_id: int) -> bool:
        return self.j_class[i] == j_id


def _class_ids(sets) -> list[int]:
    ids: dict[frozenset, int] = {}
    return [ids.setdefault(s, len(ids)) for s in sets]


class _SimonBuilder:
    def __init__(self, pm: PowerMonoid, green: GreenStructure, ctr: Counter):
        self.pm = pm
        self.g = green
        self.ctr = ctr
        self.is_idem = [green.mul(i, i) == i for i in range(len(green.elems))]

    def node_val(self, node: FNode) -> int:
        return self.g.index[node.label]

    def combine(self, a: FNode, b: FNode) -> FNode:
        return _binary(self.pm, a, b, self.ctr)

    def direct(self, items: Sequence[FNode]) -> FNode:
        if len(items) == 1:
            return items[0]
        return self.combine(items[0], items[1])

    def best(self, items: Sequence[FNode], structured) -> FNode:
        """The structured tree, unless a plain balanced tree is lower."""
        if len(items) <= 2:
            return self.direct(items)
        first = items[0].label
        if all(x.label == first for x in items) and self.is_idem[self.g.index[first]]:
            return _idempotent(first, items, self.ctr)
        node = structured(items)
        flat_height = max(x.height for x in items) + binary_height(len(items)) - 1
        if node.height > flat_height:
            return _balanced(self.pm, items, self.ctr)
        return node

    def build(self, items: Sequence[FNode]) -> FNode:
        return self.best(items, self._build)

    def smooth(self, items: Sequence[FNode]) -> FNode:
        return self.best(items, self._smooth)

    def group(self, items: Sequence[FNode]) -> FNode:
        return self.best(items, self._group)

    def _build(self, items: Sequence[FNode]) -> FNode:
        g = self.g
        vals = [self.node_val(x) for x in items]
        total = vals[0]
        for v in vals[1:]:
            total = g.mul(total, v)
        j = g.j_class[total]
        if all(g.j_class[v] == j for v in vals):
            return self.smooth(items)
        pieces: list[FNode] = []
        start = 0
        acc = None
        for i, v in enumerate(vals):
            acc = v if acc is None else g.mul(acc, v)
            if g.j_class[acc] == j:
                head = items[start:i]
                piece = items[i] if not head else self.combine(self.build(head), items[i])
                pieces.append(piece)
                start = i + 1
                acc = None
        core = self.smooth(pieces) if len(pieces) > 1 else pieces[0]
        if start < len(items):
            return self.combine(core, self.build(items[start:]))
        return core

    def _smooth(self, items: Sequence[FNode]) -> FNode:
        """All values and the total in one J-class."""
        n = len(items)
        g = self.g
        vals = [self.node_val(x) for x in items]
        pre = [vals[0]]
        for v in vals[1:]:
            pre.append(g.mul(pre[-1], v))
        suf = [vals[-1]]
        for v in reversed(vals[:-1]):
            suf.append(g.mul(v, suf[-1]))
        suf.reverse()
        # boundary i sits between items[i-1] and items[i]
        cls = [(g.l_class[pre[i - 1]], g.r_class[suf[i]]) for i in range(1, n)]
        target = cls[0]
        cuts = [i for i in range(1, n) if cls[i - 1] == target]
        first = self.smooth(items[:cuts[0]])
        last = self.smooth(items[cuts[-1]:])
        if len(cuts) == 1:
            return self.combine(first, last)
        blocks = [self.smooth(items[a:b]) for a, b in zip(cuts, cuts[1:])]
        middle = self.group(blocks)
        return self.combine(self.combine(first, middle), last)

    def _group(self, items: Sequence[FNode]) -> FNode:
        """All values in one group H-class."""
        n = len(items)
        g = self.g
        pre = [self.node_val(items[0])]
        for x in items[1:]:
            pre.append(g.mul(pre[-1], self.node_val(x)))
        ref = pre[0]
        hits = [t for t in range(n) if pre[t] == ref]
        head = items[0]
        if len(hits) == 1:
            return self.combine(head, self.group(items[1:]))
        blocks = []
        for a, b in zip(hits, hits[1:]):
            block = items[a + 1:b + 1]
            if len(block) == 1:
                blocks.append(block[0])
            else:
                blocks.append(self.combine(self.group(block[:-1]), block[-1]))
        if len(blocks) == 1:
            mid = blocks[0]
        else:
            e = blocks[0].label
            mid = _idempotent(e, blocks, self.ctr)
        node = self.combine(head, mid)
        tail = items[hits[-1] + 1:]
        if tail:
            node = self.combine(node, self.group(tail))
        return node


def _simon_over(pm: PowerMonoid, nodes: Sequence[FNode], ctr: Counter) -> FNode:
    """Simon tree whose leaves are the given subtrees."""
    n = len(nodes)
    if n == 1:
        return nodes[0]
    cap = simon_threshold(n)
    elems = generated_semigroup(pm, (x.label for x in nodes), cap)
    if len(elems) >= cap:
        return _balanced(pm, nodes, ctr)
    builder = _SimonBuilder(pm, GreenStructure(pm, elems), ctr)
    return builder.build(nodes)


# -- public operations ------------------------------------------------------------

def _count(seq) -> dict:
    out: dict = {}
    for x in seq:
        out[x] = out.get(x, 0) + 1
    return out


def build_simon(seq: Sequence[int], pm: PowerMonoid, counter: Counter | None = None
                ) -> FactorizationTree:
    if not seq:
        raise ValueError("cannot factorize an empty sequence")
    ctr = counter if counter is not None else Counter()
    leaves = [_leaf(x, i, ctr) for i, x in enumerate(seq)]
    root = _simon_over(pm, leaves, ctr)
    return FactorizationTree(SIMON, root, len(seq), pm, _count(seq))


def build_binary(seq: Sequence[int], pm: PowerMonoid, counter: Counter | None = None
                 ) -> FactorizationTree:
    if not seq:
        raise ValueError("cannot factorize an empty sequence")
    ctr = counter if counter is not None else Counter()
    leaves = [_leaf(x, i, ctr) for i, x in enumerate(seq)]
    return FactorizationTree(BINARY_KIND, _balanced(pm, leaves, ctr), len(seq), pm,
                             _count(seq))


def _normalize(updates, length: int) -> dict[int, int]:
    if isinstance(updates, Mapping):
        items = list(updates.items())
    else:
        items = list(updates)
    out: dict[int, int] = {}
    for i, x in items:
        if not 0 <= i < length:
            raise IndexError(f"position {i} outside a sequence of length {length}")
        if i in out:
            raise DuplicateUpdate(f"position {i} updated twice")
        out[i] = x
    return out


def _update(tree: FactorizationTree, updates, counter: Counter | None, simon: bool
            ) -> FactorizationTree:
    ups = _normalize(updates, tree.length)
    if not ups:
        return tree
    ctr = counter if counter is not None else Counter()
    letters = dict(tree.letters)
    old = _labels_at(tree.root, sorted(ups))
    for i, x in ups.items():
        y = old[i]
        letters[y] -= 1
        if not letters[y]:
            del letters[y]
        letters[x] = letters.get(x, 0) + 1
    root = _walk_sorted(tree.root, sorted(ups), ups, ctr, tree.pm, simon)
    return FactorizationTree(tree.kind, root, tree.length, tree.pm, letters)


def update_simon(tree: FactorizationTree, updates, counter: Counter | None = None
                 ) -> FactorizationTree:
    if tree.kind != SIMON:
        raise ValueError("not a Simon tree")
    return _update(tree, updates, counter, simon=True)


def update_binary(tree: FactorizationTree, updates, counter: Counter | None = None
                  ) -> FactorizationTree:
    if tree.kind != BINARY_KIND:
        raise ValueError("not a binary tree")
    return _update(tree, updates, counter, simon=False)


def _labels_at(root: FNode, positions: list[int]) -> dict[int, int]:
    out = {}
    for i in positions:
        node = root
        while node.kind != LEAF:
            for c in node.children:
                if c.lo <= i < c.hi:
                    node = c
                    break
        out[i] = node.label
    return out


def _leaf_labels(root: FNode) -> list[int]:
    out = []
    stack = [root]
    while stack:
        node = stack.pop()
        if node.kind == LEAF:
            out.append(node.label)
        else:
            stack.extend(node.children)
    return out


def _walk_sorted(node: FNode, positions: list[int], ups: dict[int, int], ctr: Counter,
                 pm: PowerMonoid, simon: bool) -> FNode:
    """Rebuild the part of ``node`` above the given (sorted) updated positions."""
    ctr.touched += 1
    if node.kind == LEAF:
        return _leaf(ups[node.lo], node.lo, ctr)
    groups: list[tuple[FNode, list[int]]] = []
    k = 0
    for child in node.children:
        mine = []
        while k < len(positions) and positions[k] < child.hi:
            mine.append(positions[k])
            k += 1
        groups.append((child, mine))
    kids = [(_walk_sorted(c, mine, ups, ctr, pm, simon) if mine else c) for c, mine in groups]
    if node.kind == BINARY_NODE:
        return _binary(pm, kids[0], kids[1], ctr)
    e = node.label
    if all(c.label == e for c in kids):
        return _idempotent(e, kids, ctr)
    # split into runs that still carry the idempotent and the changed children
    parts: list[FNode] = []
    run: list[FNode] = []
    for c in kids:
        if c.label == e:
            run.append(c)
            continue
        if run:
            parts.append(run[0] if len(run) == 1 else _idempotent(e, run, ctr))
            run = []
        parts.append(c)
    if run:
        parts.append(run[0] if len(run) == 1 else _idempotent(e, run, ctr))
    if not simon:
        return _balanced(pm, parts, ctr)
    return _simon_over(pm, parts, ctr)


# -- audits -------------------------------------------------------------------------

def audit(tree: FactorizationTree) -> list[str]:
    """Structural problems of a factorization tree (empty list if valid)."""
    pm = tree.pm
    problems: list[str] = []
    stack = [tree.root]
    expected_lo = 0
    while stack:
        node = stack.pop()
        if node.kind == LEAF:
            if node.lo != expected_lo or node.hi != node.lo + 1:
                problems.append(f"leaf span {node.lo}:{node.hi} out of order")
            expected_lo = node.hi
            continue
        kids = node.children
        prod = pm.product(c.label for c in kids)
        if prod != node.label:
            problems.append(f"label mismatch at span {node.lo}:{node.hi}")
        if node.kind == BINARY_NODE and len(kids) != 2:
            problems.append("binary node without two children")
        if node.kind == IDEMPOTENT:
            if tree.kind == BINARY_KIND:
                problems.append("idempotent node in a binary tree")
            if any(c.label != node.label for c in kids) or not pm.is_idempotent(node.label):
                problems.append(f"idempotent node at {node.lo}:{node.hi} is not uniform")
        if kids[0].lo != node.lo or kids[-1].hi != node.hi:
            problems.append("span mismatch")
        expected_height = 1 + max(c.height for c in kids)
        if node.height != expected_height:
            problems.append("stale height")
        stack.extend(reversed(kids))
    if expected_lo != tree.length:
        problems.append("leaf count mismatch")
    return problems


def certify_height(tree: FactorizationTree, slack: int = 0) -> bool:
    """Whether ``height <= slack + 3 * |S|`` for the generated subsemigroup S."""
    need = max(0, -(-(tree.height - slack) // 3))
    return need == 0 or tree.semigroup_size(cap=need) >= need
