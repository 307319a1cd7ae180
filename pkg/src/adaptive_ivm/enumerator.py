"""Enumeration of the distinct output tuples from the materialized view trees, and the count."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator

from .storage import DatabaseState, Relation, positions
from .view_trees import ViewTree
from .width_planner import Plan


class OwnershipError(ValueError):
    pass


class CountModeDisabled(RuntimeError):
    pass


def compute_owners(t: ViewTree) -> dict[str, int]:
    depth = {t.root: 0}
    for n in reversed(t.nodes):  # post-order reversed: parents before children
        for c in n.children:
            depth[c] = depth[n.id] + 1
    owners = {}
    for v in t.query.variables:
        holders = [n.id for n in t.nodes if v in n.schema]
        top = min(holders, key=lambda i: (depth[i], i))
        below = set(t.subtree_nodes(top))
        if any(h not in below for h in holders):
            raise OwnershipError(f"variable {v} has no unique owner")
        owners[v] = top
    return owners


@dataclass
class ProbeStats:
    """Index steps between consecutive emissions; ``max_gap`` is the delay proxy."""

    current: int = 0
    max_gap: int = 0
    emitted: int = 0
    gaps: list[int] = field(default_factory=list)

    def step(self, n: int = 1):
        self.current += n

    def emit(self):
        self.max_gap = max(self.max_gap, self.current)
        self.emitted += 1
        self.current = 0

    def close(self):
        self.max_gap = max(self.max_gap, self.current)
        self.current = 0


def owner_plan(t: ViewTree):
    owners = compute_owners(t)
    owned: dict[int, list[str]] = {}
    for v, nid in owners.items():
        owned.setdefault(nid, []).append(v)
    order = []
    stack = [t.root]
    while stack:
        nid = stack.pop()
        if nid in owned:
            order.append(nid)
        stack.extend(reversed(t.node(nid).children))
    steps = []
    bound: list[str] = []
    for nid in order:
        o = tuple(sorted(owned[nid]))
        k = tuple(v for v in bound if v in t.node(nid).schema)
        steps.append((nid, k, o))
        bound.extend(o)
    return steps, tuple(bound)


def enumerate_tree(t: ViewTree, views: dict[int, Relation], probes: ProbeStats | None = None) -> Iterator[tuple]:
    """Distinct tuples over the head variables by nested iteration over owner views."""
    probes = probes if probes is not None else ProbeStats()
    steps, bound = owner_plan(t)
    out_pos = positions(bound, t.query.free_vars)
    compiled = []
    for nid, k, o in steps:
        rel = views[nid]
        compiled.append((rel.index(k, o), positions(bound, k)))
    vals: list = []

    def rec(i: int):
        if i == len(compiled):
            probes.emit()
            yield tuple(vals[p] for p in out_pos)
            return
        ix, kp = compiled[i]
        probes.step()
        bucket = ix.get(tuple(vals[p] for p in kp))
        for o in bucket:
            probes.step()
            vals.extend(o)
            yield from rec(i + 1)
            del vals[len(vals) - len(o):]

    yield from rec(0)
    probes.close()


def enumerate_query(state: DatabaseState, plan: Plan, probes: ProbeStats | None = None) -> Iterator[tuple[tuple, int]]:
    """Tuples of every configuration in turn, each with the product of its base multiplicities."""
    q = state.query
    # a view holding a tuple the base lacks shows up as multiplicity 0, which no oracle produces
    getters = [(state.base[a.relation].data, positions(q.free_vars, a.schema)) for a in q.atoms]
    for label, cp in plan.configs.items():
        for tup in enumerate_tree(cp.tree, state.materialized[label], probes):
            m = 1
            for data, p in getters:
                m *= data.get(tuple(tup[i] for i in p), 0)
            yield tup, m


def count(state: DatabaseState, plan: Plan) -> int:
    if not plan.count_mode:
        raise CountModeDisabled("plan was built without count mode")
    return sum(state.root_count.values())
