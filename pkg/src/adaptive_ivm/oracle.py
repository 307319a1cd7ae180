"""Naive reference evaluators used for differential testing.

Nothing here reuses the engine's storage or the planner's LP code: joins are plain backtracking
over dictionaries and the LP is solved by brute-force basis enumeration at a fixed eps.
"""

from __future__ import annotations

from fractions import Fraction
from itertools import combinations

from .query_model import Query

MAX_STEPS = 10**9


class OracleLimit(RuntimeError):
    pass


def _by_key(data: dict, schema, key_vars):
    idx = {}
    ps = [schema.index(v) for v in key_vars]
    for t, m in data.items():
        idx.setdefault(tuple(t[p] for p in ps), []).append((t, m))
    return idx


def _join(parts: list[tuple[tuple[str, ...], dict]], out_vars: tuple[str, ...]) -> dict[tuple, int]:
    """Sum over all consistent combinations of one tuple per part, keyed by ``out_vars``."""
    out: dict = {}
    order = sorted(range(len(parts)), key=lambda i: len(parts[i][1]))
    seen: set[str] = set()
    plan = []
    for i in order:
        schema, data = parts[i]
        key_vars = [v for v in schema if v in seen]
        plan.append((schema, key_vars, _by_key(data, list(schema), key_vars)))
        seen |= set(schema)
    steps = [0]

    def rec(j: int, binding: dict, m: int):
        steps[0] += 1
        if steps[0] > MAX_STEPS:
            raise OracleLimit("naive join exceeded its step budget")
        if j == len(plan):
            k = tuple(binding[v] for v in out_vars)
            out[k] = out.get(k, 0) + m
            return
        schema, key_vars, idx = plan[j]
        for t, tm in idx.get(tuple(binding[v] for v in key_vars), ()):
            nb = dict(binding)
            nb.update(zip(schema, t))
            rec(j + 1, nb, m * tm)

    rec(0, {}, 1)
    return {k: m for k, m in out.items() if m}


def naive_join(q: Query, base: dict[str, dict[tuple, int]]) -> dict[tuple, int]:
    parts = [(a.schema, base.get(a.relation, {})) for a in q.atoms]
    if any(not d for _, d in parts):
        return {}
    return _join(parts, q.free_vars)


def naive_view(nid: int, tree, fragments: dict[str, dict[tuple, int]]) -> dict[tuple, int]:
    """Contents of view ``nid`` in tree order (node schema), from the given fragments."""
    n = tree.nodes[nid]
    if n.kind.value == "leaf":
        atom = tree.query.atom(n.source_atom)
        ps = [atom.schema.index(v) for v in n.schema]
        return {tuple(t[p] for p in ps): m for t, m in fragments.get(n.source_atom, {}).items()}
    kids = [(tree.nodes[c].schema, naive_view(c, tree, fragments)) for c in n.children]
    if n.kind.value == "proj":
        schema, data = kids[0]
        ps = [schema.index(v) for v in n.schema]
        out: dict = {}
        for t, m in data.items():
            k = tuple(t[p] for p in ps)
            out[k] = out.get(k, 0) + m
        return {k: m for k, m in out.items() if m}
    if any(not d for _, d in kids):
        return {}
    return _join(kids, n.schema)


def _gauss(a: list[list[Fraction]], b: list[Fraction]) -> list[Fraction] | None:
    n = len(b)
    m = [row[:] + [bb] for row, bb in zip(a, b)]
    r = 0
    for c in range(n):
        p = None
        for i in range(r, n):
            if m[i][c] != 0:
                p = i
                break
        if p is None:
            return None
        m[r], m[p] = m[p], m[r]
        for i in range(n):
            if i != r and m[i][c] != 0:
                f = m[i][c] / m[r][c]
                m[i] = [x - f * y for x, y in zip(m[i], m[r])]
        r += 1
    return [m[i][n] / m[i][i] for i in range(n)]


def lp_check(c, eps) -> Fraction:
    """Optimum of min sum_i p_i(eps) w_i subject to covering every variable, w >= 0.

    Vertices are found by picking n tight inequalities out of the m covering rows plus n sign
    constraints and solving the n x n system.
    """
    eps = Fraction(eps)
    cons = list(c.constraints) if hasattr(c, "constraints") else list(c)
    variables = sorted({v for k in cons for v in k.Z})
    if not variables:
        return Fraction(0)
    n = len(cons)
    cost = [k.exponent(eps) for k in cons]
    rows = []
    for v in variables:
        rows.append(([Fraction(1 if v in (set(k.Z) - set(k.Y)) else 0) for k in cons], Fraction(1)))
    for i in range(n):
        rows.append(([Fraction(1 if j == i else 0) for j in range(n)], Fraction(0)))
    best = None
    for pick in combinations(range(len(rows)), n):
        sol = _gauss([rows[i][0] for i in pick], [rows[i][1] for i in pick])
        if sol is None:
            continue
        if all(sum(a * x for a, x in zip(r, sol)) >= rhs for r, rhs in rows):
            val = sum(p * x for p, x in zip(cost, sol))
            if best is None or val < best:
                best = val
    if best is None:
        raise ValueError("infeasible: some variable is covered by no constraint")
    return best
