"""View trees: construction, validation, enumeration, delta paths and text serialization."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from enum import Enum
from itertools import combinations
from typing import Iterator, Sequence

from .query_model import Atom, Query


class NodeKind(str, Enum):
    LEAF = "leaf"
    JOIN = "join"
    PROJ = "proj"


class ProjectionPolicy(str, Enum):
    EAGER = "eager"
    EAGER_AND_KEEP = "eager-and-keep"


class TreeLimitExceeded(RuntimeError):
    """Raised when enumeration produces more than the allowed number of trees."""

    def __init__(self, limit: int, partial: list["ViewTree"]):
        super().__init__(f"view tree enumeration exceeded max_trees={limit}")
        self.limit = limit
        self.partial = partial


@dataclass(frozen=True)
class ViewNode:
    id: int
    kind: NodeKind
    schema: tuple[str, ...]
    children: tuple[int, ...] = ()
    source_atom: str | None = None


@dataclass(frozen=True)
class Violation:
    node: int | None
    message: str


@dataclass(frozen=True)
class Leaves:
    """Atoms at the leaves of a subtree; ``delta`` names the updated atom if it is among them."""

    atoms: frozenset[Atom]
    delta: str | None = None

    @property
    def relations(self) -> frozenset[str]:
        return frozenset(a.relation for a in self.atoms)

    def is_delta(self, atom: Atom) -> bool:
        return atom.relation == self.delta


class ViewTree:
    """A rooted tree of atom leaves, join views and projection views.

    Nodes are stored in post-order, so children always have smaller ids than their parent and
    the root is the last node.
    """

    def __init__(self, query: Query, nodes: Sequence[ViewNode], root: int):
        self.query = query
        self.nodes: tuple[ViewNode, ...] = tuple(nodes)
        self.root = root
        self._parent: dict[int, int] = {}
        for n in self.nodes:
            for c in n.children:
                self._parent[c] = n.id
        self._leaf_of = {n.source_atom: n.id for n in self.nodes if n.kind is NodeKind.LEAF}
        self._subtree_rel: dict[int, frozenset[str]] = {}
        self._key: str | None = None
        self._node_keys: dict[int, str] = {}

    # structure -----------------------------------------------------------
    def node(self, nid: int) -> ViewNode:
        if not 0 <= nid < len(self.nodes):
            raise KeyError(f"unknown node {nid}")
        return self.nodes[nid]

    def parent(self, nid: int) -> int | None:
        return self._parent.get(nid)

    def leaf_of(self, relation: str) -> int:
        try:
            return self._leaf_of[relation]
        except KeyError:
            raise KeyError(f"relation {relation!r} has no leaf in this tree") from None

    def subtree_relations(self, nid: int) -> frozenset[str]:
        if nid not in self._subtree_rel:
            n = self.node(nid)
            if n.kind is NodeKind.LEAF:
                rels = frozenset([n.source_atom])
            else:
                rels = frozenset().union(*(self.subtree_relations(c) for c in n.children))
            self._subtree_rel[nid] = rels
        return self._subtree_rel[nid]

    def subtree_nodes(self, nid: int) -> list[int]:
        out, stack = [], [nid]
        while stack:
            x = stack.pop()
            out.append(x)
            stack.extend(self.nodes[x].children)
        return out

    def internal_nodes(self) -> list[int]:
        return [n.id for n in self.nodes if n.kind is not NodeKind.LEAF]

    def name(self, nid: int) -> str:
        n = self.nodes[nid]
        if n.kind is NodeKind.LEAF:
            return n.source_atom
        return f"V{nid}"

    # identity --------------------------------------------------------------
    def canonical_key(self, nid: int | None = None) -> str:
        if nid is None:
            if self._key is None:
                self._key = self.canonical_key(self.root)
            return self._key
        hit = self._node_keys.get(nid)
        if hit is not None:
            return hit
        n = self.nodes[nid]
        if n.kind is NodeKind.LEAF:
            key = n.source_atom
        else:
            kids = sorted(self.canonical_key(c) for c in n.children)
            tag = "J" if n.kind is NodeKind.JOIN else "P"
            key = f"{tag}[{','.join(n.schema)}](" + ";".join(kids) + ")"
        self._node_keys[nid] = key
        return key

    @property
    def canonical_hash(self) -> str:
        return hashlib.sha256(self.canonical_key().encode()).hexdigest()[:16]

    def __eq__(self, other) -> bool:
        return isinstance(other, ViewTree) and self.canonical_key() == other.canonical_key()

    def __hash__(self) -> int:
        return hash(self.canonical_key())

    def __repr__(self) -> str:
        return f"ViewTree({self.canonical_key()})"

    def describe(self) -> str:
        lines = []

        def rec(nid: int, depth: int):
            n = self.nodes[nid]
            if n.kind is NodeKind.LEAF:
                lines.append("  " * depth + str(self.query.atom(n.source_atom)))
                return
            op = "join" if n.kind is NodeKind.JOIN else "sum"
            lines.append("  " * depth + f"{self.name(nid)}({','.join(n.schema)}) {op}")
            for c in n.children:
                rec(c, depth + 1)

        rec(self.root, 0)
        return "\n".join(lines)


# construction helpers ----------------------------------------------------------


class TreeBuilder:
    """Build a ViewTree bottom-up with explicit node handles."""

    def __init__(self, query: Query):
        self.query = query
        self._specs: list[tuple] = []

    def leaf(self, relation: str) -> int:
        atom = self.query.atom(relation)
        self._specs.append((NodeKind.LEAF, tuple(sorted(atom.schema)), (), relation))
        return len(self._specs) - 1

    def join(self, *children: int) -> int:
        schema = set()
        for c in children:
            schema |= set(self._specs[c][1])
        self._specs.append((NodeKind.JOIN, tuple(sorted(schema)), tuple(children), None))
        return len(self._specs) - 1

    def project(self, child: int, schema) -> int:
        self._specs.append((NodeKind.PROJ, tuple(sorted(schema)), (child,), None))
        return len(self._specs) - 1

    def build(self, root: int | None = None) -> ViewTree:
        root = len(self._specs) - 1 if root is None else root
        nodes: list[ViewNode] = []
        remap: dict[int, int] = {}

        def rec(h: int) -> int:
            kind, schema, children, src = self._specs[h]
            kids = tuple(rec(c) for c in children)
            nid = len(nodes)
            nodes.append(ViewNode(nid, kind, schema, kids, src))
            remap[h] = nid
            return nid

        r = rec(root)
        return ViewTree(self.query, nodes, r)


def validate_view_tree(t: ViewTree) -> Violation | None:
    q = t.query
    seen: set[int] = set()
    stack = [t.root]
    while stack:
        x = stack.pop()
        if x in seen:
            return Violation(x, "node reachable twice (not a tree)")
        seen.add(x)
        stack.extend(t.nodes[x].children)
    if len(seen) != len(t.nodes):
        missing = min(set(range(len(t.nodes))) - seen)
        return Violation(missing, "node not reachable from the root")
    leaves = [n for n in t.nodes if n.kind is NodeKind.LEAF]
    rels = [n.source_atom for n in leaves]
    if sorted(rels) != sorted(a.relation for a in q.atoms):
        return Violation(None, "leaves are not in bijection with the atoms")
    for n in t.nodes:
        if n.kind is NodeKind.LEAF:
            if n.children:
                return Violation(n.id, "leaf with children")
            if set(n.schema) != q.atom(n.source_atom).vars:
                return Violation(n.id, "leaf schema differs from its atom")
        elif n.kind is NodeKind.JOIN:
            if len(n.children) < 2:
                return Violation(n.id, "join view needs at least two children")
            union = set().union(*(t.nodes[c].schema for c in n.children))
            if set(n.schema) != union:
                return Violation(n.id, "join schema must be the union of child schemas")
        else:
            if len(n.children) != 1:
                return Violation(n.id, "projection view needs exactly one child")
            child = set(t.nodes[n.children[0]].schema)
            if not set(n.schema) < child:
                return Violation(n.id, "projection schema must be a proper subset of its child")
            below = t.subtree_relations(n.id)
            for v in child - set(n.schema):
                if not q.atoms_of(v) <= below:
                    return Violation(n.id, f"variable {v} is dropped but occurs in an atom outside the subtree")
    return None


# enumeration -----------------------------------------------------------------------


def _two_partitions(items: tuple[str, ...]) -> Iterator[tuple[tuple[str, ...], tuple[str, ...]]]:
    """Unordered splits into two nonempty parts; the first part holds items[0]."""
    first, rest = items[0], items[1:]
    n = len(rest)
    for k in range(0, n):
        for combo in combinations(rest, k):
            left = (first,) + combo
            right = tuple(x for x in rest if x not in combo)
            yield left, right


def enumerate_view_trees(
    q: Query,
    max_trees: int = 20000,
    projection_policy: ProjectionPolicy | str = ProjectionPolicy.EAGER_AND_KEEP,
) -> list[ViewTree]:
    """All binary-join view trees of ``q`` under the given projection policy, deduplicated."""
    policy = ProjectionPolicy(projection_policy)
    all_rels = tuple(sorted(a.relation for a in q.atoms))
    at = {v: q.atoms_of(v) for v in q.variables}

    # A shape is a nested tuple: ("L", rel) | ("J", schema, (s1, s2)) | ("P", schema, s).
    memo: dict[tuple[str, ...], list[tuple]] = {}

    def schema_of(shape) -> tuple[str, ...]:
        if shape[0] == "L":
            return tuple(sorted(q.atom(shape[1]).schema))
        return shape[1]

    def with_projections(shape, rels: frozenset[str], is_root: bool) -> list[tuple]:
        if is_root:
            return [shape]
        sch = schema_of(shape)
        droppable = tuple(v for v in sch if at[v] <= rels)
        if not droppable:
            return [shape]
        kept = tuple(v for v in sch if v not in droppable)
        projected = ("P", kept, shape)
        if policy is ProjectionPolicy.EAGER:
            return [projected]
        return [projected, shape]

    def combine(rels: tuple[str, ...], is_root: bool) -> Iterator[tuple]:
        rs = frozenset(rels)
        if len(rels) == 1:
            yield from with_projections(("L", rels[0]), rs, is_root)
            return
        for left, right in _two_partitions(rels):
            for s1 in gen(left):
                for s2 in gen(right):
                    sch = tuple(sorted(set(schema_of(s1)) | set(schema_of(s2))))
                    yield from with_projections(("J", sch, (s1, s2)), rs, is_root)

    def gen(rels: tuple[str, ...]) -> list[tuple]:
        if rels not in memo:
            memo[rels] = list(combine(rels, False))
        return memo[rels]

    trees: list[ViewTree] = []
    seen: set[str] = set()
    for s in combine(all_rels, True):
        t = _shape_to_tree(q, s)
        k = t.canonical_key()
        if k in seen:
            continue
        seen.add(k)
        trees.append(t)
        if len(trees) > max_trees:
            trees.sort(key=lambda t: t.canonical_hash)
            raise TreeLimitExceeded(max_trees, trees[:max_trees])
    trees.sort(key=lambda t: t.canonical_hash)
    return trees


def _shape_to_tree(q: Query, shape) -> ViewTree:
    b = TreeBuilder(q)

    def key(s) -> str:
        if s[0] == "L":
            return s[1]
        if s[0] == "P":
            return f"P[{','.join(s[1])}](" + key(s[2]) + ")"
        return f"J[{','.join(s[1])}](" + ";".join(sorted(key(c) for c in s[2])) + ")"

    def rec(s) -> int:
        if s[0] == "L":
            return b.leaf(s[1])
        if s[0] == "P":
            return b.project(rec(s[2]), s[1])
        kids = sorted(s[2], key=key)
        return b.join(*(rec(c) for c in kids))

    rec(shape)
    return b.build()


# delta trees -------------------------------------------------------------------------


@dataclass(frozen=True)
class DeltaViewTree:
    base: ViewTree
    updated_relation: str
    delta_path: tuple[int, ...]

    def on_path(self, nid: int) -> bool:
        return nid in self.delta_path


def delta_view_tree(t: ViewTree, rel: str) -> DeltaViewTree:
    t.query.atom(rel)  # raises for unknown relations
    path = [t.leaf_of(rel)]
    while (p := t.parent(path[-1])) is not None:
        path.append(p)
    return DeltaViewTree(t, rel, tuple(path))


def leaves_under(view: int, dt: DeltaViewTree) -> Leaves:
    t = dt.base
    rels = t.subtree_relations(view)
    atoms = frozenset(t.query.atom(r) for r in rels)
    delta = dt.updated_relation if dt.updated_relation in rels else None
    return Leaves(atoms, delta)


# serialization -----------------------------------------------------------------------


def serialize_tree(t: ViewTree) -> str:
    """Indented text: one node per line, children indented below their parent."""
    lines = []

    def rec(nid: int, depth: int):
        n = t.nodes[nid]
        src = f" {n.source_atom}" if n.source_atom else ""
        lines.append(f"{'  ' * depth}#{nid} {n.kind.value} [{','.join(n.schema)}]{src}")
        for c in n.children:
            rec(c, depth + 1)

    rec(t.root, 0)
    return "\n".join(lines)


def parse_tree(q: Query, text: str) -> ViewTree:
    entries = []  # (depth, id, kind, schema, src)
    for raw in text.splitlines():
        if not raw.strip():
            continue
        stripped = raw.lstrip(" ")
        depth = (len(raw) - len(stripped)) // 2
        parts = stripped.split()
        nid = int(parts[0].lstrip("#"))
        kind = NodeKind(parts[1])
        sch = parts[2].strip("[]")
        schema = tuple(sch.split(",")) if sch else ()
        src = parts[3] if len(parts) > 3 else None
        entries.append((depth, nid, kind, schema, src))
    children: dict[int, list[int]] = {e[1]: [] for e in entries}
    stack: list[tuple[int, int]] = []
    for depth, nid, *_ in entries:
        while stack and stack[-1][0] >= depth:
            stack.pop()
        if stack:
            children[stack[-1][1]].append(nid)
        stack.append((depth, nid))
    by_id = {e[1]: e for e in entries}
    nodes = [
        ViewNode(nid, by_id[nid][2], by_id[nid][3], tuple(children[nid]), by_id[nid][4])
        for nid in sorted(by_id)
    ]
    if [n.id for n in nodes] != list(range(len(nodes))):
        raise ValueError("node ids must be 0..n-1")
    return ViewTree(q, nodes, entries[0][1])
