"""Full-state consistency checks used by the ``check`` command and the test suite."""

from __future__ import annotations

import hashlib

from .enumerator import OwnershipError, compute_owners
from .oracle import naive_view
from .storage import DatabaseState, exceeds_light_bound, within_heavy_drop
from .view_trees import NodeKind
from .width_planner import Plan


def audit(state: DatabaseState, plan: Plan, views: bool = False) -> list[str]:
    """Return a description of every violated invariant (empty when the state is sound)."""
    bad: list[str] = []
    q = state.query
    # fragments partition each base relation by current signature
    for a in q.atoms:
        base = state.base[a.relation].data
        seen: dict[tuple, int] = {}
        jv = state.rel_join_vars(a.relation)
        ps = [a.schema.index(v) for v in jv]
        for sig, frag in state.fragments[a.relation].items():
            for t, m in frag.data.items():
                if t in seen:
                    bad.append(f"{a.relation}{t} lies in two fragments")
                seen[t] = m
                want = tuple(state.partitions.label(v, t[p]) for v, p in zip(jv, ps))
                if want != sig:
                    bad.append(f"{a.relation}{t} sits in fragment {sig} but has signature {want}")
        if seen != base:
            bad.append(f"fragments of {a.relation} do not add up to the base relation")
    # degree counters
    for v in state.join_vars:
        fresh: dict = {}
        for rel in q.atoms_of(v):
            i = q.atom(rel).schema.index(v)
            for t in state.base[rel].data:
                fresh[t[i]] = fresh.get(t[i], 0) + 1
        if fresh != state.partitions.degree[v]:
            bad.append(f"degree counters of {v} are stale")
        stray = state.partitions.heavy[v] - set(fresh)
        if stray:
            bad.append(f"heavy set of {v} holds inactive values {sorted(stray)[:3]}")
        for x, d in fresh.items():
            heavy = x in state.partitions.heavy[v]
            if not heavy and exceeds_light_bound(d, state.M, state.eps):
                bad.append(f"light value {v}={x} has degree {d} above the light bound")
            if heavy and within_heavy_drop(d, state.M, state.eps):
                bad.append(f"heavy value {v}={x} has degree {d} at or below the heavy bound")
    if state.N != sum(len(r.data) for r in state.base.values()):
        bad.append("N differs from the number of stored tuples")
    if not (state.M // 4 <= state.N < state.M):
        bad.append(f"size invariant broken: N={state.N}, M={state.M}")
    for label, cp in plan.configs.items():
        try:
            compute_owners(cp.tree)
        except OwnershipError as e:
            bad.append(f"{label}: {e}")
        if views:
            frags = {a.relation: state.fragment_for(a.relation, cp.config).as_dict() for a in q.atoms}
            for n in cp.tree.nodes:
                if n.kind is NodeKind.LEAF:
                    continue
                got = state.materialized[label][n.id].reorder(n.schema)
                if got != naive_view(n.id, cp.tree, frags):
                    bad.append(f"{label}: view {n.id} differs from its definition")
        if plan.count_mode:
            root = state.materialized[label][cp.tree.root]
            if state.root_count[label] != sum(root.data.values()):
                bad.append(f"{label}: count differs from the root total")
    return bad


def snapshot(state: DatabaseState) -> dict[tuple[str, int], dict]:
    return {
        (label, nid): dict(rel.data)
        for label, vs in state.materialized.items()
        for nid, rel in vs.items()
    }


def state_digest(state: DatabaseState) -> str:
    h = hashlib.sha256()
    h.update(f"M={state.M};N={state.N};".encode())
    for rel in sorted(state.base):
        h.update(rel.encode())
        h.update(repr(sorted(state.base[rel].data.items())).encode())
    for (label, nid), data in sorted(snapshot(state).items()):
        h.update(f"{label}/{nid}".encode())
        h.update(repr(sorted(data.items())).encode())
    return h.hexdigest()[:16]
