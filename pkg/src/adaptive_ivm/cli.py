"""Command-line interface: plan, run, check, bench."""

from __future__ import annotations

import math
import statistics
import sys
from fractions import Fraction

import click

from . import maintenance_engine as me
from .audit import audit, snapshot, state_digest
from .degree_constraints import CombinatorialLimit
from .enumerator import CountModeDisabled, count, enumerate_query
from .oracle import naive_join
from .query_model import QuerySyntaxError, parse_query
from .storage import Interner, RejectedUpdate, read_bulk
from .symbolic import fmt_rational
from .view_trees import ProjectionPolicy, TreeLimitExceeded, enumerate_view_trees
from .width_planner import PlanFormatError, dynamic_width, maintenance_width, plan_from_text, plan_to_text
from . import workloads

EXIT_USAGE, EXIT_DIVERGENCE, EXIT_LIMIT = 1, 2, 3


def _fail(msg: str, code: int):
    click.echo(f"error: {msg}", err=True)
    sys.exit(code)


def build_plan(query_text: str, max_trees=20000, policy="eager-and-keep", epsilon=None, count_mode=False, jobs=1):
    q = parse_query(query_text)
    trees = enumerate_view_trees(q, max_trees=max_trees, projection_policy=ProjectionPolicy(policy))
    plan = maintenance_width(q, trees, epsilon=epsilon, count_mode=count_mode, jobs=jobs, policy=policy)
    return plan, trees


def _load_plan(path: str):
    try:
        with open(path) as fh:
            return plan_from_text(fh.read())
    except (OSError, PlanFormatError) as e:
        _fail(str(e), EXIT_USAGE)


@click.group()
def main():
    """Adaptive incremental maintenance of join queries under single-tuple updates."""


@main.command("plan")
@click.argument("query_file", type=click.Path(exists=True, dir_okay=False))
@click.option("-o", "--output", type=click.Path(dir_okay=False), help="Write the plan file here.")
@click.option("--trees", "max_trees", default=20000, show_default=True, help="View tree enumeration limit.")
@click.option("--policy", type=click.Choice([p.value for p in ProjectionPolicy]), default="eager-and-keep", show_default=True)
@click.option("--epsilon", default=None, help="Override the optimal eps (rational, e.g. 1/3).")
@click.option("--count-mode", is_flag=True, help="Maintain the output count alongside the views.")
@click.option("--jobs", default=1, show_default=True, help="Worker processes for per-configuration costs.")
def cmd_plan(query_file, output, max_trees, policy, epsilon, count_mode, jobs):
    """Compute the maintenance width and write an executable plan."""
    with open(query_file) as fh:
        text = fh.read().strip()
    try:
        eps = Fraction(epsilon) if epsilon is not None else None
        if eps is not None and not 0 <= eps <= 1:
            raise ValueError("eps must lie in [0, 1]")
        plan, trees = build_plan(text, max_trees, policy, eps, count_mode, jobs)
    except (QuerySyntaxError, ValueError, ZeroDivisionError) as e:
        _fail(str(e), EXIT_USAGE)
    except TreeLimitExceeded as e:
        _fail(f"more than {e.limit} view trees; raise --trees", EXIT_LIMIT)
    except CombinatorialLimit as e:
        _fail(str(e), EXIT_LIMIT)
    if output:
        with open(output, "w") as fh:
            fh.write(plan_to_text(plan))
    dw = dynamic_width(plan.query, trees)
    click.echo(f"query  {plan.query}")
    click.echo(f"trees  {len(trees)} ({policy})")
    click.echo(f"mw     {fmt_rational(plan.mw)}")
    click.echo(f"eps    {fmt_rational(plan.epsilon_star)}")
    click.echo(f"dw     {fmt_rational(dw)}")
    click.echo("config  tree              cost at eps  cost")
    for label, cp in plan.configs.items():
        click.echo(f"{label:7s} {cp.tree.canonical_hash}  {fmt_rational(cp.cost(plan.epsilon_star)):11s}  {cp.cost.pretty()}")


def _parse_update(line: str, interner: Interner):
    sign = line[0]
    parts = line[1:].split()
    if sign not in "+-" or not parts:
        raise ValueError(f"bad update line {line!r}")
    return parts[0], tuple(interner.value(x) for x in parts[1:]), 1 if sign == "+" else -1


def _enum_lines(state, plan, interner):
    rows = sorted(enumerate_query(state, plan))
    return [" ".join(interner.token(v) for v in t) + f" # {m}" for t, m in rows]


@main.command("run")
@click.argument("plan_file", type=click.Path(exists=True, dir_okay=False))
@click.option("--bulk", type=click.Path(exists=True, dir_okay=False), help="Initial tuples, one 'R a b' per line.")
@click.option("--stream", type=click.File("r"), default="-", help="Update stream (default stdin).")
def cmd_run(plan_file, bulk, stream):
    """Process '+R a b' / '-R a b' updates and '? enum', '? count', '? stats' queries.

    Counts are ring counts: the sum of output multiplicities, which equals the number of
    distinct output tuples when every stored tuple has multiplicity one.
    """
    plan = _load_plan(plan_file)
    interner = Interner()
    data = []
    if bulk:
        try:
            with open(bulk) as fh:
                data = read_bulk(fh, plan.query, interner)
        except ValueError as e:
            _fail(str(e), EXIT_USAGE)
    state = me.initial_build(plan, data)
    for raw in stream:
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("?"):
            cmd = line[1:].strip()
            if cmd == "enum":
                for out in _enum_lines(state, plan, interner):
                    click.echo(out)
            elif cmd == "count":
                try:
                    click.echo(str(count(state, plan)))
                except CountModeDisabled as e:
                    click.echo(f"ERR {e}")
            elif cmd == "stats":
                s = state.stats
                click.echo(
                    f"N={state.N} M={state.M} work={state.work.ops} updates={s.updates} "
                    f"rejected={s.rejected} major={s.major} minor={s.minor} migrated={s.migrated}"
                )
            else:
                click.echo(f"ERR unknown query {cmd!r}")
            continue
        try:
            rel, t, m = _parse_update(line, interner)
            plan.query.atom(rel)
            me.process_update(state, plan, rel, t, m)
        except RejectedUpdate:
            click.echo("ERR reject")
        except (KeyError, ValueError) as e:
            click.echo(f"ERR {e}")


def replay_check(plan, updates, every=1, views=False, fault_at=None):
    """Replay ``updates`` comparing against the oracle; returns (step, message) of the first miss."""
    state = me.new_state(plan)
    for step, (rel, t, m) in enumerate(updates, 1):
        try:
            me.process_update(state, plan, rel, t, m)
        except RejectedUpdate:
            pass
        if fault_at == step:
            label = next(iter(plan.configs))
            root = state.materialized[label][plan.configs[label].tree.root]
            root.add(tuple(0 for _ in root.schema), 1)
        if step % every:
            continue
        got = dict(enumerate_query(state, plan))
        want = naive_join(plan.query, {r: rel_.as_dict() for r, rel_ in state.base.items()})
        if got != want:
            return step, f"output differs ({len(got)} vs {len(want)} tuples), digest {state_digest(state)}"
        if plan.count_mode and count(state, plan) != sum(want.values()):
            return step, f"count differs, digest {state_digest(state)}"
        bad = audit(state, plan, views=views)
        if bad:
            return step, f"{bad[0]}, digest {state_digest(state)}"
    return None, state


@main.command("check")
@click.argument("plan_file", type=click.Path(exists=True, dir_okay=False))
@click.option("--stream", type=click.Path(exists=True, dir_okay=False), help="Replay this stream instead of a random one.")
@click.option("--seed", default=0, show_default=True)
@click.option("--steps", default=2000, show_default=True)
@click.option("--every", default=1, show_default=True, help="Compare after every k-th update.")
@click.option("--views", is_flag=True, help="Also recompute every view from scratch.")
@click.option("--inject-fault", type=int, default=None, hidden=True)
def cmd_check(plan_file, stream, seed, steps, every, views, inject_fault):
    """Differential test of the engine against the naive oracle."""
    plan = _load_plan(plan_file)
    if stream:
        interner = Interner()
        with open(stream) as fh:
            ups = [_parse_update(l.strip(), interner) for l in fh if l.strip() and not l.startswith("?")]
    else:
        ups = list(workloads.zipf_stream(plan.query, seed, workloads.StreamSpec(steps=steps)))
    step, res = replay_check(plan, ups, every, views, inject_fault)
    if step is not None:
        click.echo(f"FAIL at step {step}: {res}")
        sys.exit(EXIT_DIVERGENCE)
    s = res.stats
    click.echo(f"PASS {len(ups)} updates (major={s.major} minor={s.minor} rejected={s.rejected})")


def bench_work(plan, n: int, seed: int, probes: int) -> float:
    bulk, dom = workloads.adversarial_instance(plan, n, seed)
    state = me.initial_build(plan, bulk)
    total = done = 0
    for rel, t in workloads.random_updates(plan.query, dom, probes, seed + 1):
        if t in state.base[rel].data:
            continue
        before = state.work.ops
        me.process_update(state, plan, rel, t, 1)
        me.process_update(state, plan, rel, t, -1)
        total += state.work.ops - before
        done += 2
    return total / max(done, 1)


def fit_exponent(sizes, works) -> float:
    xs = [math.log(n) for n in sizes]
    ys = [math.log(max(w, 1e-9)) for w in works]
    return statistics.linear_regression(xs, ys).slope


@main.command("bench")
@click.argument("plan_file", type=click.Path(exists=True, dir_okay=False))
@click.option("--sizes", default="1000,10000,100000", show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--probes", default=200, show_default=True, help="Insert/delete pairs measured per size.")
def cmd_bench(plan_file, sizes, seed, probes):
    """Mean work per update on adversarial instances and the fitted log-log exponent."""
    plan = _load_plan(plan_file)
    ns = [int(x) for x in sizes.split(",")]
    works = []
    for n in ns:
        w = bench_work(plan, n, seed, probes)
        works.append(w)
        click.echo(f"N={n:<8d} mean_work={w:.1f}")
    if len(ns) > 1:
        click.echo(f"exponent={fit_exponent(ns, works):.3f} mw={fmt_rational(plan.mw)}")


if __name__ == "__main__":
    main()
