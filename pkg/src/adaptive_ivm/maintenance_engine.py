"""Delta propagation through the active view trees.

Each update to a relation reaches every configuration whose labels agree with the updated
tuple's signature.  Along the delta path of that configuration's tree, a join view's delta is
found by evaluating its guarding query over the fragments (a generic multiway join), projecting
the result onto the view schema and attaching the product of child multiplicities; a projection
view's delta is the marginalized child delta.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable

from .query_model import Degree, Query
from .storage import (
    DatabaseState,
    Relation,
    RejectedUpdate,
    apply_base_update,
    check_update,
    is_light_at_rebuild,
    positions,
    restriction_signature,
)
from .view_trees import NodeKind, ViewTree, delta_view_tree
from .width_planner import GuardingStrategy, Plan

log = logging.getLogger(__name__)

Delta = dict  # tuple -> nonzero int, aligned to the schema of the node it belongs to


class InvariantBreach(RuntimeError):
    pass


@dataclass(frozen=True)
class GuardingQueryInstance:
    strategy: GuardingStrategy
    config_label: str
    order: tuple[str, ...]
    # per body atom: relation name and its variables restricted to the head, in bind order
    body: tuple[tuple[str, tuple[str, ...]], ...]
    # per bound variable: (position, [(relation, key variables)])
    steps: tuple[tuple[str, tuple[tuple[str, tuple[str, ...]], ...]], ...]

    @property
    def head(self) -> tuple[str, ...]:
        return self.strategy.xprime


def _instance(q: Query, strategy: GuardingStrategy, label: str) -> GuardingQueryInstance:
    xp = set(strategy.xprime)
    delta = q.atom(strategy.relation)
    first = [v for v in delta.schema if v in xp]
    rest = [v for v in strategy.order() if v in xp and v not in first]
    rest += sorted(xp - set(first) - set(rest))
    order = tuple(first + rest)
    body = []
    for g in strategy.guards:
        gv = q.atom(g).vars & xp
        body.append((g, tuple(v for v in order if v in gv)))
    steps = []
    for i, z in enumerate(order):
        before = set(order[:i])
        srcs = tuple((g, tuple(v for v in gvs if v in before)) for g, gvs in body if z in gvs)
        steps.append((z, srcs))
    return GuardingQueryInstance(strategy, label, order, tuple(body), tuple(steps))


def evaluate_guarding_query(
    g: GuardingQueryInstance, state: DatabaseState, update: tuple
) -> list[tuple]:
    """Distinct head tuples (in ``g.order``) of the join of the guard relations."""
    q = state.query
    cfg = state.configs_by_label[g.config_label]
    delta_rel = g.strategy.relation
    delta_vals = dict(zip(q.atom(delta_rel).schema, update))
    work = state.work
    pos = {v: i for i, v in enumerate(g.order)}
    compiled = []
    for z, srcs in g.steps:
        cands = []
        for rel, kvars in srcs:
            if rel == delta_rel:
                cands.append(None)
            else:
                frag = state.fragment_for(rel, cfg)
                cands.append((frag.index(kvars, (z,)), tuple(pos[v] for v in kvars)))
        compiled.append((z, cands))
    out: list[tuple] = []
    vals: list = [None] * len(g.order)

    def rec(i: int):
        if i == len(compiled):
            out.append(tuple(vals))
            return
        z, cands = compiled[i]
        sets = []
        for c in cands:
            if c is None:
                sets.append({(delta_vals[z],): 1})
            else:
                ix, kp = c
                work.tick()
                s = ix.get(tuple(vals[p] for p in kp))
                if not s:
                    return
                sets.append(s)
        sets.sort(key=len)
        smallest, others = sets[0], sets[1:]
        for v in smallest:
            work.tick()
            ok = True
            for s in others:
                work.tick()
                if v not in s:
                    ok = False
                    break
            if ok:
                vals[i] = v[0]
                rec(i + 1)

    rec(0)
    return out


class Engine:
    """Compiled per-plan helpers: delta paths, guarding query instances and position maps."""

    def __init__(self, plan: Plan, debug: bool = False):
        self.plan = plan
        self.query = plan.query
        self.debug = debug
        self._paths: dict[tuple[str, str], tuple[int, ...]] = {}
        self._instances: dict[tuple[str, int, str], GuardingQueryInstance] = {}
        self._pos: dict[tuple[tuple[str, ...], tuple[str, ...]], tuple[int, ...]] = {}
        self.last_delta_sizes: list[int] = []

    def path(self, label: str, rel: str) -> tuple[int, ...]:
        k = (label, rel)
        if k not in self._paths:
            self._paths[k] = delta_view_tree(self.plan.configs[label].tree, rel).delta_path
        return self._paths[k]

    def instance(self, label: str, nid: int, rel: str) -> GuardingQueryInstance:
        k = (label, nid, rel)
        if k not in self._instances:
            strat = self.plan.configs[label].strategies[(nid, rel)]
            self._instances[k] = _instance(self.query, strat, label)
        return self._instances[k]

    def pos(self, src: tuple[str, ...], dst: tuple[str, ...]) -> tuple[int, ...]:
        k = (src, dst)
        p = self._pos.get(k)
        if p is None:
            p = self._pos[k] = positions(src, dst)
        return p


def _engine(state: DatabaseState, plan: Plan) -> Engine:
    eng = getattr(state, "engine", None)
    if eng is None or eng.plan is not plan:
        eng = Engine(plan)
        state.engine = eng
    return eng


def compute_delta_view(
    view: int,
    tree: ViewTree,
    label: str,
    rel: str,
    update: tuple,
    child_delta: Delta,
    state: DatabaseState,
    plan: Plan,
) -> Delta:
    """Exact delta of ``view`` given the delta of its child on the path."""
    eng = _engine(state, plan)
    node = tree.node(view)
    views = state.materialized[label]
    target = views[view].schema
    path = eng.path(label, rel)
    dchild = next(c for c in node.children if c in path)
    cschema = views[dchild].schema
    if not child_delta:
        return {}
    if node.kind is NodeKind.PROJ:
        p = eng.pos(cschema, target)
        out: Delta = {}
        for t, m in child_delta.items():
            k = tuple(t[i] for i in p)
            out[k] = out.get(k, 0) + m
            state.work.tick()
        return {k: m for k, m in out.items() if m}

    g = eng.instance(label, view, rel)
    ys = evaluate_guarding_query(g, state, update)
    to_x = eng.pos(g.order, target)
    cands = {tuple(y[i] for i in to_x) for y in ys}
    dpos = eng.pos(target, cschema)
    sibs = []
    for c in node.children:
        if c == dchild:
            continue
        rc = views.get(c)
        if rc is None:
            raise InvariantBreach(f"missing materialization of node {c} in {label}")
        sibs.append((rc, eng.pos(target, rc.schema)))
    out = {}
    for x in cands:
        m = child_delta.get(tuple(x[i] for i in dpos), 0)
        state.work.tick()
        if not m:
            continue
        for rc, p in sibs:
            m *= rc.get(tuple(x[i] for i in p))
            if not m:
                break
        if m:
            out[x] = m
    if eng.debug:
        exact = _delta_by_extension(node, target, dchild, cschema, child_delta, sibs, views)
        if exact != out:
            raise InvariantBreach(f"guarding query missed delta tuples at node {view} ({label})")
    return out


def _delta_by_extension(node, target, dchild, cschema, child_delta, sibs, views) -> Delta:
    """Reference delta: extend each child-delta tuple through the siblings one at a time."""
    partial = [(dict(zip(cschema, t)), m) for t, m in child_delta.items()]
    for rc, _ in sibs:
        nxt = []
        for b, m in partial:
            key_vars = tuple(v for v in rc.schema if v in b)
            for t in rc.lookup(key_vars, tuple(b[v] for v in key_vars)):
                nb = dict(b)
                nb.update(zip(rc.schema, t))
                nxt.append((nb, m * rc.data[t]))
        partial = nxt
    out: Delta = {}
    for b, m in partial:
        k = tuple(b[v] for v in target)
        out[k] = out.get(k, 0) + m
    return {k: m for k, m in out.items() if m}


def propagate(state: DatabaseState, plan: Plan, rel: str, t: tuple, m: int, labels: Iterable[str]):
    """Push a single-tuple delta on ``rel`` (already applied to its fragment) up every listed tree."""
    eng = _engine(state, plan)
    sizes = []
    for label in labels:
        cp = plan.configs[label]
        views = state.materialized[label]
        path = eng.path(label, rel)
        delta: Delta = {t: m}
        for nid in path[1:]:
            delta = compute_delta_view(nid, cp.tree, label, rel, t, delta, state, plan)
            sizes.append(len(delta))
            if not delta:
                break
            v = views[nid]
            for x, dm in delta.items():
                v.add(x, dm)
        else:
            if plan.count_mode:
                state.root_count[label] += sum(delta.values())
    eng.last_delta_sizes = sizes
    if eng.debug:
        log.debug("update %s%s%+d delta sizes %s work %d", rel, t, m, sizes, state.work.ops)


def fragment_update(state: DatabaseState, plan: Plan, rel: str, t: tuple, m: int, sig: tuple[Degree, ...]):
    """Change one fragment entry without touching base data or degrees, then propagate."""
    state.fragment(rel, sig).add(t, m)
    propagate(state, plan, rel, t, m, [d.label() for d in state.agreeing_configs(rel, sig)])


def process_update(state: DatabaseState, plan: Plan, rel: str, t: tuple, m: int, rebalance: bool = True):
    """Apply a single-tuple insert (m > 0) or delete (m < 0); raises RejectedUpdate untouched."""
    from . import rebalancer

    try:
        check_update(state, rel, t, m)
    except RejectedUpdate:
        state.stats.rejected += 1
        raise
    res = apply_base_update(state, rel, t, m)
    state.stats.updates += 1
    propagate(state, plan, rel, t, m, [d.label() for d in res.affected])
    if rebalance:
        rebalancer.after_update(state, plan, rel, t)
    return state


def materialize_empty(state: DatabaseState, plan: Plan):
    state.fragments = {a.relation: {} for a in state.query.atoms}
    state.materialized = {}
    state.root_count = {}
    for label, cp in plan.configs.items():
        views: dict[int, Relation] = {}
        for n in cp.tree.nodes:
            if n.kind is NodeKind.LEAF:
                views[n.id] = state.fragment_for(n.source_atom, cp.config)
            else:
                views[n.id] = Relation(n.schema, state.work)
        state.materialized[label] = views
        state.root_count[label] = 0
    prepare_indexes(state, plan)


def prepare_indexes(state: DatabaseState, plan: Plan):
    """Create, while everything is still empty, every index the updates and enumeration use."""
    from .enumerator import owner_plan

    eng = _engine(state, plan)
    for a in state.query.atoms:
        for v in state.rel_join_vars(a.relation):
            state.base[a.relation].index((v,), a.schema)
    for label, cp in plan.configs.items():
        views = state.materialized[label]
        for (nid, rel), _ in cp.strategies.items():
            if cp.tree.node(nid).kind is not NodeKind.JOIN:
                continue
            g = eng.instance(label, nid, rel)
            for z, srcs in g.steps:
                for r, kvars in srcs:
                    if r != rel:
                        state.fragment_for(r, cp.config).index(kvars, (z,))
        steps, _ = owner_plan(cp.tree)
        for nid, k, o in steps:
            views[nid].index(k, o)


def rebuild(state: DatabaseState, plan: Plan, M: int):
    """Recompute partitions at threshold base M, then refill fragments and views from base data."""
    state.M = M
    eps = state.eps
    for v in state.join_vars:
        state.partitions.heavy[v] = {
            x for x, d in state.partitions.degree[v].items() if not is_light_at_rebuild(d, M, eps)
        }
    materialize_empty(state, plan)
    for a in state.query.atoms:
        for t in sorted(state.base[a.relation].data):
            m = state.base[a.relation].data[t]
            fragment_update(state, plan, a.relation, t, m, restriction_signature(a.relation, t, state))


def new_state(plan: Plan, eps: Fraction | None = None, debug: bool = False) -> DatabaseState:
    st = DatabaseState(plan.query, plan.epsilon_star if eps is None else eps, M=1)
    st.engine = Engine(plan, debug=debug)
    materialize_empty(st, plan)
    return st


def initial_build(plan: Plan, bulk: Iterable[tuple[str, tuple]], debug: bool = False) -> DatabaseState:
    """Load ``bulk`` (one (relation, tuple) per unit of multiplicity) and build at M = 2N + 1."""
    st = new_state(plan, debug=debug)
    for rel, t in bulk:
        apply_base_update(st, rel, t, 1)
    rebuild(st, plan, 2 * st.N + 1)
    return st
