"""Major rebalancing when N drifts out of [floor(M/4), M), and minor rebalancing when a single
value's degree crosses the relaxed heavy/light thresholds."""

from __future__ import annotations

from typing import Iterable

from .query_model import H, L
from .storage import (
    DatabaseState,
    exceeds_light_bound,
    restriction_signature,
    within_heavy_drop,
)
from .width_planner import Plan


def maybe_major(state: DatabaseState, plan: Plan) -> bool:
    from .maintenance_engine import rebuild

    M, N = state.M, state.N
    if N < M // 4:
        new_m = M // 2 - 1
    elif N >= M:
        new_m = 2 * M
    else:
        return False
    rebuild(state, plan, new_m)
    state.stats.major += 1
    return True


def migrate(state: DatabaseState, plan: Plan, var: str, value, to_heavy: bool) -> int:
    """Move every base tuple containing ``var = value`` to the fragments of its new class."""
    from .maintenance_engine import fragment_update

    moving = []
    for rel in sorted(state.query.atoms_of(var)):
        base = state.base[rel]
        for t in base.lookup((var,), (value,)):
            moving.append((rel, t, base.data[t], restriction_signature(rel, t, state)))
    for rel, t, m, sig in moving:
        fragment_update(state, plan, rel, t, -m, sig)
    if to_heavy:
        state.partitions.heavy[var].add(value)
    else:
        state.partitions.heavy[var].discard(value)
    for rel, t, m, _ in moving:
        fragment_update(state, plan, rel, t, m, restriction_signature(rel, t, state))
    state.stats.minor += 1
    state.stats.migrated += len(moving)
    return len(moving)


def maybe_minor(state: DatabaseState, plan: Plan, touched: Iterable[tuple[str, object]]) -> int:
    moved = 0
    for var, value in touched:
        deg = state.partitions.degree[var].get(value, 0)
        if deg == 0:
            continue
        heavy = value in state.partitions.heavy[var]
        if not heavy and exceeds_light_bound(deg, state.M, state.eps):
            migrate(state, plan, var, value, True)
            moved += 1
        elif heavy and within_heavy_drop(deg, state.M, state.eps):
            migrate(state, plan, var, value, False)
            moved += 1
    return moved


def touched_values(state: DatabaseState, rel: str, t: tuple) -> list[tuple[str, object]]:
    schema = state.query.atom(rel).schema
    jv = set(state.rel_join_vars(rel))
    return [(v, x) for v, x in zip(schema, t) if v in jv]


def after_update(state: DatabaseState, plan: Plan, rel: str, t: tuple):
    if not maybe_major(state, plan):
        maybe_minor(state, plan, touched_values(state, rel, t))


def label_of(state: DatabaseState, var: str, value):
    return H if value in state.partitions.heavy[var] else L
