"""Symbolic update costs of view trees, the maintenance width with its optimal eps, the dynamic
width without partitioning, and the executable plan."""

from __future__ import annotations

import itertools
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Sequence

from .degree_constraints import (
    ConstraintSet,
    derive_constraints,
    maximal_acyclic_subsets,
    project,
)
from .polymatroid import fractional_edge_cover, pbd_symbolic
from .query_model import DegreeConfiguration, Degree, Query, degree_configurations, join_variables
from .symbolic import AFF_ZERO, AffineExpr, MinOfAffines, PiecewiseLinear, pl_max
from .view_trees import (
    DeltaViewTree,
    Leaves,
    NodeKind,
    ViewTree,
    delta_view_tree,
    leaves_under,
)

ZERO_PL = PiecewiseLinear.const(0)


@dataclass(frozen=True)
class GuardingStrategy:
    view: int
    relation: str
    xprime: tuple[str, ...]
    cprime: ConstraintSet
    cost: MinOfAffines
    guards: tuple[str, ...]  # delta relation first, then the other guard atoms sorted

    def order(self) -> list[str]:
        """Variable order for the guarding join: delta-atom variables, then a topological order."""
        from .degree_constraints import topological_order

        return topological_order(self.cprime)


@dataclass(frozen=True)
class ViewCost:
    cost: MinOfAffines
    # one candidate per piece of ``cost``: (piece, X', C')
    candidates: tuple[tuple[AffineExpr, tuple[str, ...], ConstraintSet], ...]

    def best_at(self, eps: Fraction) -> tuple[AffineExpr, tuple[str, ...], ConstraintSet]:
        return min(self.candidates, key=lambda c: (c[0](eps), len(c[1]), c[1], c[0]))


def _relevant_config(leaves: Leaves, config: DegreeConfiguration) -> tuple[tuple[str, Degree], ...]:
    vs = set()
    for a in leaves.atoms:
        if not leaves.is_delta(a):
            vs |= a.vars
    return config.restrict(vs)


@lru_cache(maxsize=None)
def _view_cost_cached(atoms: frozenset, delta: str | None, schema: frozenset, cfg: tuple) -> ViewCost:
    variables = tuple(v for v, _ in cfg)
    config = DegreeConfiguration(variables, tuple(d for _, d in cfg))
    dc = derive_constraints(Leaves(atoms, delta), config)
    extra = sorted(dc.vars - schema)
    found: dict[AffineExpr, tuple[tuple[str, ...], ConstraintSet]] = {}
    for k in range(len(extra) + 1):
        for add in itertools.combinations(extra, k):
            xp = tuple(sorted(schema | set(add)))
            for cp in maximal_acyclic_subsets(project(dc, xp)):
                for piece in pbd_symbolic(cp).pieces:
                    found.setdefault(piece, (xp, cp))
    total = MinOfAffines(tuple(found))
    cands = tuple((p, *found[p]) for p in total.pieces)
    return ViewCost(total, cands)


def view_cost(leaves: Leaves, schema, config: DegreeConfiguration) -> ViewCost:
    return _view_cost_cached(leaves.atoms, leaves.delta, frozenset(schema), _relevant_config(leaves, config))


def delta_view_cost(view: int, dt: DeltaViewTree, config: DegreeConfiguration) -> tuple[MinOfAffines, tuple]:
    """Cost of computing the delta of ``view`` and the winning (piece, X', C') per piece."""
    if view not in dt.delta_path:
        raise ValueError(f"view {view} is not on the delta path of {dt.updated_relation}")
    lv = leaves_under(view, dt)
    vc = view_cost(lv, dt.base.node(view).schema, config)
    return vc.cost, vc.candidates


def _node_cost(t: ViewTree, nid: int, config: DegreeConfiguration) -> PiecewiseLinear:
    return _node_cost_cached(t.subtree_relations(nid), t.node(nid).schema, t.query, config)


@lru_cache(maxsize=None)
def _node_cost_cached(rels: frozenset, schema: tuple, q: Query, config: DegreeConfiguration) -> PiecewiseLinear:
    atoms = frozenset(q.atom(r) for r in rels)
    if len(rels) == 1:
        return ZERO_PL
    out = None
    for r in sorted(rels):
        f = view_cost(Leaves(atoms, r), schema, config).cost.to_pl()
        out = f if out is None else out.maximum(f)
    return out


def tree_update_cost(t: ViewTree, config: DegreeConfiguration) -> PiecewiseLinear:
    return pl_max(_node_cost(t, n.id, config) for n in t.nodes)


def _tree_costs(trees: Sequence[ViewTree], config: DegreeConfiguration) -> list[PiecewiseLinear]:
    memo: dict[str, PiecewiseLinear] = {}

    def sub(t: ViewTree, nid: int) -> PiecewiseLinear:
        key = t.canonical_key(nid)
        if key in memo:
            return memo[key]
        out = _node_cost(t, nid, config)
        for c in t.node(nid).children:
            out = out.maximum(sub(t, c))
        memo[key] = out
        return out

    return [sub(t, t.root) for t in trees]


def config_cost(q: Query, config: DegreeConfiguration, trees: Sequence[ViewTree]) -> PiecewiseLinear:
    if not trees:
        raise ValueError("need at least one view tree")
    distinct = set(_tree_costs(trees, config))
    it = iter(sorted(distinct, key=repr))
    out = next(it)
    for f in it:
        out = out.minimum(f)
    return out


# plans ---------------------------------------------------------------------------------------


@dataclass
class ConfigPlan:
    config: DegreeConfiguration
    tree: ViewTree
    cost: PiecewiseLinear
    strategies: dict[tuple[int, str], GuardingStrategy]


@dataclass
class Plan:
    query: Query
    epsilon_star: Fraction
    mw: Fraction
    global_cost: PiecewiseLinear
    configs: dict[str, ConfigPlan]
    count_mode: bool = False
    policy: str = "eager-and-keep"
    epsilon_override: bool = False

    @property
    def active_trees(self) -> list[ViewTree]:
        return [cp.tree for cp in self.configs.values()]

    def config_plan(self, config: DegreeConfiguration) -> ConfigPlan:
        return self.configs[config.label()]


def strategies_for(t: ViewTree, config: DegreeConfiguration, eps: Fraction) -> dict[tuple[int, str], GuardingStrategy]:
    out = {}
    for atom in t.query.atoms:
        dt = delta_view_tree(t, atom.relation)
        for nid in dt.delta_path:
            lv = leaves_under(nid, dt)
            schema = t.node(nid).schema
            vc = view_cost(lv, schema, config)
            _, xp, cp = vc.best_at(eps)
            guards = [atom.relation] + sorted(
                a.relation for a in lv.atoms if a.relation != atom.relation and a.vars & set(xp)
            )
            out[(nid, atom.relation)] = GuardingStrategy(nid, atom.relation, xp, cp, vc.cost, tuple(guards))
    return out


def _per_config(args):
    q, config, trees = args
    costs = _tree_costs(trees, config)
    return costs


def maintenance_width(
    q: Query,
    trees: Sequence[ViewTree],
    epsilon: Fraction | None = None,
    count_mode: bool = False,
    jobs: int = 1,
    policy: str = "eager-and-keep",
) -> Plan:
    """Minimize the global cost max_d min_T cost(T, d) over eps in [0, 1].

    The global cost is kept as an exact piecewise-linear function, so its minimum lies on one
    of its breakpoints; the smallest minimizer is reported.  ``epsilon`` overrides the
    minimizer while keeping the per-configuration tree choice rule.
    """
    trees = list(trees)
    configs = degree_configurations(q)
    if jobs > 1 and len(configs) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            all_costs = list(ex.map(_per_config, [(q, d, trees) for d in configs]))
    else:
        all_costs = [_tree_costs(trees, d) for d in configs]
    per_config_cost = []
    for costs in all_costs:
        distinct = sorted(set(costs), key=repr)
        out = distinct[0]
        for f in distinct[1:]:
            out = out.minimum(f)
        per_config_cost.append(out)
    G = pl_max(per_config_cost)
    mw, eps_star = G.minimize()
    if epsilon is not None:
        eps_star = Fraction(epsilon)
        mw = G(eps_star)
    plans = {}
    for d, costs, cc in zip(configs, all_costs, per_config_cost):
        best = min(
            range(len(trees)), key=lambda i: (costs[i](eps_star), trees[i].canonical_hash)
        )
        t = trees[best]
        plans[d.label()] = ConfigPlan(d, t, cc, strategies_for(t, d, eps_star))
    return Plan(q, eps_star, mw, G, plans, count_mode, policy, epsilon is not None)


def dynamic_width(q: Query, trees: Sequence[ViewTree]) -> Fraction:
    best = None
    memo: dict = {}
    for t in trees:
        worst = Fraction(0)
        for n in t.nodes:
            rels = t.subtree_relations(n.id)
            atoms = [t.query.atom(r) for r in sorted(rels)]
            for r in sorted(rels):
                key = (rels, n.schema, r)
                if key not in memo:
                    rest = frozenset(n.schema) - t.query.atom(r).vars
                    memo[key] = fractional_edge_cover(atoms, rest)
                worst = max(worst, memo[key])
                if best is not None and worst >= best:
                    break
        if best is None or worst < best:
            best = worst
    return best


# cross-check: distributive expansion into min-of-max terms, each minimized by an LP -------------


@dataclass(frozen=True)
class Expr:
    """Small expression tree over affine functions of eps: ("aff", a) | ("min", ...) | ("max", ...)."""

    op: str
    args: tuple = ()
    aff: AffineExpr | None = None

    @staticmethod
    def a(c0, c1=0) -> "Expr":
        return Expr("aff", aff=AffineExpr(Fraction(c0), Fraction(c1)))

    @staticmethod
    def min_(*xs) -> "Expr":
        return Expr("min", tuple(xs))

    @staticmethod
    def max_(*xs) -> "Expr":
        return Expr("max", tuple(xs))

    def __call__(self, eps):
        if self.op == "aff":
            return self.aff(eps)
        vals = [x(eps) for x in self.args]
        return min(vals) if self.op == "min" else max(vals)


def min_of_max_form(e: Expr) -> list[frozenset[AffineExpr]]:
    """Rewrite ``e`` as min over terms of max over affine functions (each term a set)."""
    if e.op == "aff":
        return [frozenset([e.aff])]
    parts = [min_of_max_form(x) for x in e.args]
    if e.op == "min":
        terms = [t for p in parts for t in p]
    else:
        terms = [frozenset().union(*combo) for combo in itertools.product(*parts)]
    uniq = set(terms)
    # a term that contains another term is never smaller
    return [t for t in uniq if not any(o < t for o in uniq)]


def lp_per_term_minimum(e: Expr) -> tuple[float, float]:
    """Numeric cross-check of the optimum: each min-of-max term is an LP in (eps, t)."""
    from scipy.optimize import linprog

    best = (float("inf"), 0.0)
    for term in min_of_max_form(e):
        # minimize t subject to c0 + c1*eps <= t, 0 <= eps <= 1
        A = [[float(a.c1), -1.0] for a in term]
        b = [-float(a.c0) for a in term]
        res = linprog([0.0, 1.0], A_ub=A, b_ub=b, bounds=[(0, 1), (None, None)], method="highs")
        if res.status == 0 and res.fun < best[0] - 1e-12:
            best = (res.fun, res.x[0])
    return best


# plan files ------------------------------------------------------------------------------------

PLAN_FORMAT = "adaptive-ivm-plan 1"


class PlanFormatError(ValueError):
    pass


def _pl_text(f: PiecewiseLinear) -> str:
    from .symbolic import fmt_rational

    return " ".join(f"{fmt_rational(x)}:{fmt_rational(y)}" for x, y in zip(f.xs, f.ys))


def _pl_parse(text: str) -> PiecewiseLinear:
    xs, ys = [], []
    for pair in text.split():
        x, y = pair.split(":")
        xs.append(Fraction(x))
        ys.append(Fraction(y))
    return PiecewiseLinear(xs, ys)


def plan_to_text(plan: Plan) -> str:
    from .query_model import pretty_print
    from .symbolic import fmt_rational
    from .view_trees import serialize_tree

    out = [
        PLAN_FORMAT,
        f"query {pretty_print(plan.query)}",
        f"policy {plan.policy}",
        f"count_mode {int(plan.count_mode)}",
        f"epsilon_override {int(plan.epsilon_override)}",
        f"epsilon_star {fmt_rational(plan.epsilon_star)}",
        f"mw {fmt_rational(plan.mw)}",
        f"global_cost {_pl_text(plan.global_cost)}",
    ]
    for label, cp in plan.configs.items():
        out.append(f"config {label}")
        out.append(f"cost {_pl_text(cp.cost)}")
        for line in serialize_tree(cp.tree).splitlines():
            out.append(f"| {line}")
        for (nid, rel), s in sorted(cp.strategies.items()):
            out.append(f"strategy {nid} {rel}")
            out.append(f"  xprime {','.join(s.xprime)}")
            out.append(f"  cprime {s.cprime.serialize()}")
            out.append(f"  cost {s.cost}")
            out.append(f"  guards {','.join(s.guards)}")
        out.append("end")
    return "\n".join(out) + "\n"


def plan_from_text(text: str) -> Plan:
    from .degree_constraints import parse_constraint_set
    from .query_model import config_from_label, parse_query
    from .symbolic import parse_min_of_affines
    from .view_trees import parse_tree

    lines = text.splitlines()
    if not lines or lines[0].strip() != PLAN_FORMAT:
        raise PlanFormatError(f"expected header {PLAN_FORMAT!r}")
    head: dict[str, str] = {}
    i = 1
    while i < len(lines) and not lines[i].startswith("config "):
        k, _, v = lines[i].partition(" ")
        head[k] = v
        i += 1
    try:
        q = parse_query(head["query"])
        configs: dict[str, ConfigPlan] = {}
        while i < len(lines):
            label = lines[i].split()[1]
            i += 1
            cost = _pl_parse(lines[i].partition(" ")[2])
            i += 1
            tree_lines = []
            while lines[i].startswith("| "):
                tree_lines.append(lines[i][2:])
                i += 1
            tree = parse_tree(q, "\n".join(tree_lines))
            strategies = {}
            while lines[i].startswith("strategy "):
                _, nid, rel = lines[i].split()
                fields = {}
                for j in range(1, 5):
                    k, _, v = lines[i + j].strip().partition(" ")
                    fields[k] = v
                i += 5
                xp = tuple(fields["xprime"].split(",")) if fields["xprime"] else ()
                strategies[(int(nid), rel)] = GuardingStrategy(
                    int(nid),
                    rel,
                    xp,
                    parse_constraint_set(fields["cprime"]),
                    parse_min_of_affines(fields["cost"]),
                    tuple(fields["guards"].split(",")),
                )
            if lines[i] != "end":
                raise PlanFormatError(f"line {i + 1}: expected 'end'")
            i += 1
            configs[label] = ConfigPlan(config_from_label(q, label), tree, cost, strategies)
        return Plan(
            q,
            Fraction(head["epsilon_star"]),
            Fraction(head["mw"]),
            _pl_parse(head["global_cost"]),
            configs,
            bool(int(head["count_mode"])),
            head["policy"],
            bool(int(head["epsilon_override"])),
        )
    except (KeyError, IndexError, ValueError) as e:
        if isinstance(e, PlanFormatError):
            raise
        raise PlanFormatError(f"malformed plan file: {e}") from e
