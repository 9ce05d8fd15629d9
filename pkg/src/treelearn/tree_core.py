"""Labeled trees, the term and training-set formats, and oracle access.

A tree is stored as flat arrays indexed by node id, where ids are preorder
positions.  Every node has two pointer slots, ``left`` (E1) and ``right``
(E2).  In binary mode they are the first and second child; in unranked mode
they are the first child and the next sibling, i.e. the usual
first-child/next-sibling encoding.  Either way the slot pair is a binary tree,
and that binary view is what the automaton pipeline consumes.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

BINARY = "binary"
UNRANKED = "unranked"
ABSENT = -1


class TreeSyntaxError(ValueError):
    """Malformed tree term or training file; ``offset`` is a byte offset."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset


class LabeledTree:
    """Immutable labeled tree over preorder node ids."""

    def __init__(self, labels: Sequence[str], left: Sequence[int],
                 right: Sequence[int], mode: str = BINARY):
        if mode not in (BINARY, UNRANKED):
            raise ValueError(f"unknown arity mode {mode!r}")
        n = len(labels)
        if n == 0:
            raise ValueError("a tree needs at least one node")
        if len(left) != n or len(right) != n:
            raise ValueError("label and pointer arrays differ in length")
        self.mode = mode
        self.labels = tuple(labels)
        self.left = tuple(int(v) for v in left)
        self.right = tuple(int(v) for v in right)
        self.alphabet = tuple(sorted(set(self.labels)))
        self._check_and_index()

    @property
    def n(self) -> int:
        return len(self.labels)

    def __len__(self) -> int:
        return len(self.labels)

    def __repr__(self) -> str:
        return f"LabeledTree(n={self.n}, mode={self.mode})"

    # -- construction checks -------------------------------------------------

    def _check_and_index(self) -> None:
        n = self.n
        # binary view: parent pointer in the E1/E2 structure
        bparent = [ABSENT] * n
        for u in range(n):
            for c in (self.left[u], self.right[u]):
                if c == ABSENT:
                    continue
                if not 0 <= c < n:
                    raise ValueError(f"node {u} points to invalid node {c}")
                if bparent[c] != ABSENT or c == 0:
                    raise ValueError(f"node {c} has two incoming pointers")
                bparent[c] = u
        if self.mode == UNRANKED and self.right[0] != ABSENT:
            raise ValueError("the root of an unranked tree has no siblings")
        # preorder check of the binary view; this also proves connectivity
        order = []
        stack = [0]
        while stack:
            u = stack.pop()
            order.append(u)
            if self.right[u] != ABSENT:
                stack.append(self.right[u])
            if self.left[u] != ABSENT:
                stack.append(self.left[u])
        if order != list(range(n)):
            raise ValueError("node ids are not a connected preorder numbering")
        self.bparent = tuple(bparent)

        # tree parent (the real parent in unranked mode)
        if self.mode == BINARY:
            parent = list(bparent)
        else:
            parent = [ABSENT] * n
            for u in range(n):
                c = self.left[u]
                while c != ABSENT:
                    parent[c] = u
                    c = self.right[c]
        self.parent = tuple(parent)

        # subtree size w.r.t. the ancestor relation, depth, binary subtree size
        bsize = [1] * n
        for u in range(n - 1, -1, -1):
            for c in (self.left[u], self.right[u]):
                if c != ABSENT:
                    bsize[u] += bsize[c]
        self.bsize = tuple(bsize)
        if self.mode == BINARY:
            self.size = self.bsize
        else:
            self.size = tuple(1 + (bsize[self.left[u]] if self.left[u] != ABSENT else 0)
                              for u in range(n))
        depth = [0] * n
        for u in range(1, n):
            depth[u] = depth[parent[u]] + 1
        self.depth = tuple(depth)

    # -- structure -----------------------------------------------------------

    @property
    def root(self) -> int:
        return 0

    def children(self, u: int) -> list[int]:
        """Children in the tree's own sense (all of them in unranked mode)."""
        if self.mode == BINARY:
            return [c for c in (self.left[u], self.right[u]) if c != ABSENT]
        out = []
        c = self.left[u]
        while c != ABSENT:
            out.append(c)
            c = self.right[c]
        return out

    def binary_children(self, u: int) -> list[int]:
        return [c for c in (self.left[u], self.right[u]) if c != ABSENT]

    def is_ancestor(self, u: int, v: int) -> bool:
        """Reflexive ancestor relation of the tree (u <= v)."""
        return u <= v < u + self.size[u]

    def sibling_leq(self, u: int, v: int) -> bool:
        """Reflexive sibling order; only meaningful in unranked mode."""
        if u == v:
            return True
        return self.parent[u] == self.parent[v] and self.parent[u] != ABSENT and u < v

    def is_first_child_arity(self) -> bool:
        return all((self.left[u] == ABSENT) == (self.right[u] == ABSENT) for u in range(self.n))

    def with_label(self, u: int, label: str) -> "LabeledTree":
        labels = list(self.labels)
        labels[u] = label
        return LabeledTree(labels, self.left, self.right, self.mode)

    def to_term(self) -> str:
        return format_tree(self)


# -- term syntax --------------------------------------------------------------

_TOKEN = re.compile(r"\s*(?:(\()|(\))|(-)(?=[\s()]|$)|([^\s()]+))")


def _tokens(text: str):
    pos = 0
    while True:
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            rest = text[pos:]
            if rest.strip():
                raise TreeSyntaxError("unexpected character", len(text[:pos].encode()))
            return
        start = m.start(m.lastindex)
        kind = ("open", "close", "absent", "symbol")[m.lastindex - 1]
        yield kind, m.group(m.lastindex), len(text[:start].encode())
        pos = m.end()


def parse_tree(text: str, mode: str = "auto") -> LabeledTree:
    """Parse a parenthesized term such as ``(a (b) (c (d) -))``.

    ``mode`` is ``"binary"``, ``"unranked"`` or ``"auto"``.  Auto picks binary
    when every node lists zero or two child slots, unranked otherwise.
    """
    if mode not in ("auto", BINARY, UNRANKED):
        raise ValueError(f"unknown mode {mode!r}")
    labels: list[str] = []
    kids: list[list[int]] = []
    offsets: list[int] = []
    stack: list[int] = []
    expect_label = False
    done = False
    last_offset = 0
    for kind, tok, off in _tokens(text):
        last_offset = off
        if done:
            raise TreeSyntaxError("trailing input after the tree", off)
        if expect_label:
            if kind != "symbol":
                raise TreeSyntaxError("expected a label after '('", off)
            labels[stack[-1]] = tok
            expect_label = False
            continue
        if kind == "open":
            u = len(labels)
            labels.append("")
            kids.append([])
            offsets.append(off)
            if stack:
                kids[stack[-1]].append(u)
            elif u != 0:
                raise TreeSyntaxError("trailing input after the tree", off)
            stack.append(u)
            expect_label = True
        elif kind == "close":
            if not stack:
                raise TreeSyntaxError("unbalanced ')'", off)
            stack.pop()
            if not stack:
                done = True
        elif kind == "absent":
            if not stack:
                raise TreeSyntaxError("'-' outside a node", off)
            kids[stack[-1]].append(ABSENT)
        else:
            raise TreeSyntaxError(f"unexpected symbol {tok!r}", off)
    if expect_label:
        raise TreeSyntaxError("missing label", len(text.encode()))
    if stack or not labels:
        raise TreeSyntaxError("unexpected end of input", len(text.encode()))

    has_absent = any(ABSENT in k for k in kids)
    binary_ok = all(len(k) in (0, 2) for k in kids)
    if mode == "auto":
        mode = BINARY if binary_ok or has_absent else UNRANKED
    if mode == BINARY:
        for u, k in enumerate(kids):
            if len(k) not in (0, 2):
                raise TreeSyntaxError(
                    f"mixed arity in binary mode: node {labels[u]!r} lists {len(k)} children",
                    offsets[u])
        left = [k[0] if k else ABSENT for k in kids]
        right = [k[1] if k else ABSENT for k in kids]
    else:
        if has_absent:
            u = next(i for i, k in enumerate(kids) if ABSENT in k)
            raise TreeSyntaxError("'-' is only allowed in binary mode", offsets[u])
        left = [ABSENT] * len(labels)
        right = [ABSENT] * len(labels)
        for u, k in enumerate(kids):
            if k:
                left[u] = k[0]
                for a, b in zip(k, k[1:]):
                    right[a] = b
    del last_offset
    return LabeledTree(labels, left, right, mode)


def format_tree(tree: LabeledTree) -> str:
    """Inverse of :func:`parse_tree` (iterative, safe for deep trees)."""
    out: list[str] = []
    stack: list[object] = [0]
    while stack:
        item = stack.pop()
        if isinstance(item, str):
            out.append(item)
            continue
        u = int(item)
        out.append("(" + tree.labels[u])
        if tree.mode == BINARY:
            l, r = tree.left[u], tree.right[u]
            if l == ABSENT and r == ABSENT:
                out.append(")")
                continue
            stack.append(")")
            stack.append(r if r != ABSENT else " -")
            if r != ABSENT:
                stack.append(" ")
            stack.append(l if l != ABSENT else " -")
            if l != ABSENT:
                stack.append(" ")
        else:
            ch = tree.children(u)
            stack.append(")")
            for c in reversed(ch):
                stack.append(c)
                stack.append(" ")
    return "".join(out)


# -- training sets ------------------------------------------------------------

@dataclass(frozen=True)
class TrainingSet:
    examples: tuple[tuple[int, str], ...] = ()

    def __post_init__(self):
        seen: dict[int, str] = {}
        for u, c in self.examples:
            if c not in "+-" or len(c) != 1:
                raise ValueError(f"polarity must be '+' or '-', got {c!r}")
            if seen.get(u, c) != c:
                raise ValueError(f"node {u} appears with both polarities")
            seen[u] = c
        object.__setattr__(self, "examples", tuple(dict.fromkeys(self.examples)))

    @classmethod
    def of(cls, pairs: Iterable[tuple[int, str]]) -> "TrainingSet":
        return cls(tuple((int(u), c) for u, c in pairs))

    def __len__(self) -> int:
        return len(self.examples)

    def __iter__(self):
        return iter(self.examples)

    @property
    def nodes(self) -> list[int]:
        return [u for u, _ in self.examples]

    @property
    def positives(self) -> list[int]:
        return [u for u, c in self.examples if c == "+"]

    @property
    def negatives(self) -> list[int]:
        return [u for u, c in self.examples if c == "-"]

    def validate(self, tree: LabeledTree) -> None:
        for u, _ in self.examples:
            if not 0 <= u < tree.n:
                raise ValueError(f"example node {u} is not in the tree")

    def add(self, u: int, c: str) -> "TrainingSet":
        return TrainingSet(self.examples + ((u, c),))


def parse_training(text: str) -> TrainingSet:
    pairs = []
    offset = 0
    for line in text.splitlines(keepends=True):
        body = line.split("#", 1)[0].strip()
        if body:
            parts = body.split()
            if len(parts) != 2 or parts[1] not in ("+", "-") or not parts[0].isdigit():
                raise TreeSyntaxError(f"bad training line {line.strip()!r}", offset)
            pairs.append((int(parts[0]), parts[1]))
        offset += len(line.encode())
    try:
        return TrainingSet.of(pairs)
    except ValueError as exc:
        raise TreeSyntaxError(str(exc), 0) from None


def format_training(train: TrainingSet) -> str:
    return "".join(f"{u} {c}\n" for u, c in train)


# -- oracle access ------------------------------------------------------------

class EulerLCA:
    """Lowest common ancestors via an Euler tour and a sparse table of minima."""

    def __init__(self, tree: LabeledTree):
        n = tree.n
        euler: list[int] = []
        first = [0] * n
        stack = [(0, 0)]
        kids = [tree.children(u) for u in range(n)]
        while stack:
            u, i = stack.pop()
            if i == 0:
                first[u] = len(euler)
            euler.append(u)
            if i < len(kids[u]):
                stack.append((u, i + 1))
                stack.append((kids[u][i], 0))
        self.first = np.asarray(first, dtype=np.int64)
        depth = np.asarray(tree.depth, dtype=np.int64)
        tour = np.asarray(euler, dtype=np.int64)
        m = len(tour)
        # key packs (depth, node) so a plain min picks the shallowest node
        key = depth[tour] * n + tour
        self.n = n
        self.table = [key]
        k = 1
        while (1 << k) <= m:
            prev = self.table[-1]
            half = 1 << (k - 1)
            self.table.append(np.minimum(prev[:-half], prev[half:]))
            k += 1

    def query(self, u: int, v: int) -> int:
        a, b = int(self.first[u]), int(self.first[v])
        if a > b:
            a, b = b, a
        k = (b - a + 1).bit_length() - 1
        row = self.table[k]
        key = min(int(row[a]), int(row[b - (1 << k) + 1]))
        return key % self.n


RELATIONS_BINARY = ("E1", "E2", "<=")
RELATIONS_UNRANKED = ("E1", "E2", "<=", "sib<=")
_REL_ALIASES = {"≤": "<=", "leq": "<=", "⪯": "sib<=", "sibleq": "sib<="}


@dataclass
class OracleSession:
    """Counted oracle access to one tree (single owner, not thread safe)."""

    tree: LabeledTree
    counters: dict = field(default_factory=lambda: {"neighborhood": 0, "relation": 0, "lca": 0})
    with_lca: bool = True
    observed: set = field(default_factory=set)

    def __post_init__(self):
        self.lca_index = EulerLCA(self.tree) if self.with_lca else None

    def neighborhood(self, u: int) -> set[int]:
        t = self.tree
        self._check(u)
        self.counters["neighborhood"] += 1
        out = {u}
        if t.parent[u] != ABSENT:
            out.add(t.parent[u])
        if t.mode == BINARY:
            out.update(t.binary_children(u))
        else:
            if t.left[u] != ABSENT:
                out.add(t.left[u])
            if t.right[u] != ABSENT:
                out.add(t.right[u])
            if t.bparent[u] != ABSENT and t.right[t.bparent[u]] == u:
                out.add(t.bparent[u])
        self.observed.update(out)
        return out

    def relation(self, rel: str, args: Sequence[int]) -> bool:
        t = self.tree
        rel = _REL_ALIASES.get(rel, rel)
        for u in args:
            self._check(u)
        if rel.startswith("R_"):
            if len(args) != 1:
                raise ValueError(f"{rel} is unary")
            self.counters["relation"] += 1
            return t.labels[args[0]] == rel[2:]
        if rel not in ("E1", "E2", "<=", "sib<="):
            raise ValueError(f"unknown relation {rel!r}")
        if len(args) != 2:
            raise ValueError(f"{rel} is binary")
        if rel == "sib<=" and t.mode == BINARY:
            raise ValueError("the sibling order only exists in unranked mode")
        self.counters["relation"] += 1
        u, v = args
        if rel == "E1":
            return t.left[u] == v
        if rel == "E2":
            return t.right[u] == v
        if rel == "<=":
            return t.is_ancestor(u, v)
        return t.sibling_leq(u, v)

    def label(self, u: int) -> str:
        self._check(u)
        self.counters["relation"] += 1
        return self.tree.labels[u]

    def lca(self, u: int, v: int) -> int:
        if self.lca_index is None:
            raise RuntimeError("this session only grants local access")
        self._check(u)
        self._check(v)
        self.counters["lca"] += 1
        w = self.lca_index.query(u, v)
        self.observed.add(w)
        return w

    def total_calls(self) -> int:
        return sum(self.counters.values())

    def reset(self) -> None:
        for k in self.counters:
            self.counters[k] = 0
        self.observed.clear()

    def _check(self, u: int) -> None:
        if not 0 <= u < self.tree.n:
            raise ValueError(f"node {u} is not in the tree")


def neighborhood(session: OracleSession, u: int) -> set[int]:
    return session.neighborhood(u)


def relation(session: OracleSession, rel: str, args: Sequence[int]) -> bool:
    return session.relation(rel, tuple(args))


def lca(session: OracleSession, u: int, v: int) -> int:
    return session.lca(u, v)
