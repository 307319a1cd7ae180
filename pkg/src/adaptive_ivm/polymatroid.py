"""The polymatroid-bound LP under degree constraints, solved symbolically in eps.

The feasible region {w >= 0, sum_{i : A in Z_i - Y_i} w_i >= 1 for every variable A} does not
depend on eps, so its vertices are enumerated once with exact rational arithmetic and the bound
is the minimum of the affine objective values at those vertices.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from itertools import combinations
from math import comb
from typing import Sequence

from .degree_constraints import CombinatorialLimit, ConstraintSet, DegreeConstraint
from .query_model import Atom
from .symbolic import AFF_ONE, AFF_ZERO, AffineExpr, MinOfAffines

MAX_BASES = 1_000_000


class InfeasibleLP(ValueError):
    pass


@dataclass(frozen=True)
class VertexWeights:
    weights: tuple[Fraction, ...]
    basis: tuple[tuple[int, ...], tuple[int, ...]]  # (tight rows, support columns)

    def __len__(self) -> int:
        return len(self.weights)


def solve_square(rows: Sequence[Sequence[Fraction]], rhs: Sequence[Fraction]) -> list[Fraction] | None:
    """Gaussian elimination over the rationals; None when the matrix is singular."""
    n = len(rows)
    a = [list(map(Fraction, r)) + [Fraction(b)] for r, b in zip(rows, rhs)]
    for col in range(n):
        piv = next((r for r in range(col, n) if a[r][col] != 0), None)
        if piv is None:
            return None
        a[col], a[piv] = a[piv], a[col]
        p = a[col][col]
        if p != 1:
            a[col] = [x / p for x in a[col]]
        for r in range(n):
            if r != col and a[r][col] != 0:
                f = a[r][col]
                a[r] = [x - f * y for x, y in zip(a[r], a[col])]
    return [a[r][n] for r in range(n)]


def _vertices_of_covers(covers: Sequence[frozenset[str]], rows: Sequence[str]) -> list[VertexWeights]:
    m, n = len(covers), len(rows)
    for v in rows:
        if not any(v in cv for cv in covers):
            raise InfeasibleLP(f"variable {v} is covered by no constraint")
    if comb(m + n, n) > MAX_BASES:
        raise CombinatorialLimit(f"{comb(m + n, n)} candidate bases exceed {MAX_BASES}")
    inc = [[1 if v in cv else 0 for cv in covers] for v in rows]
    found: dict[tuple[Fraction, ...], VertexWeights] = {}
    for t in range(0, min(m, n) + 1):
        for T in combinations(range(n), t):
            for S in combinations(range(m), t):
                if t:
                    sol = solve_square([[inc[r][s] for s in S] for r in T], [1] * t)
                    if sol is None or any(x < 0 for x in sol):
                        continue
                else:
                    sol = []
                w = [Fraction(0)] * m
                for s, x in zip(S, sol):
                    w[s] = x
                if all(sum(w[j] for j in range(m) if inc[r][j]) >= 1 for r in range(n)):
                    key = tuple(w)
                    if key not in found:
                        found[key] = VertexWeights(key, (T, S))
    return [found[k] for k in sorted(found)]


def enumerate_vertices(c: ConstraintSet) -> list[VertexWeights]:
    """All basic feasible solutions, weights aligned with the order of ``c``."""
    rows = sorted(c.vars)
    return _vertices_of_covers([k.covers for k in c], rows)


def evaluate_objective(v: VertexWeights, c: ConstraintSet) -> AffineExpr:
    if len(v.weights) != len(c):
        raise ValueError("vertex and constraint set have different lengths")
    out = AFF_ZERO
    for w, k in zip(v.weights, c):
        if w:
            out = out + k.exponent.scale(w)
    return out


def _check_exponents(c: ConstraintSet):
    for k in c:
        if not k.exponent.nonnegative_on_unit():
            raise ValueError(f"exponent of {k} is negative somewhere on [0,1]")


def pbd_symbolic_unreduced(c: ConstraintSet) -> MinOfAffines:
    """Minimum over every vertex of the full LP, without presolve."""
    _check_exponents(c)
    if not c.vars:
        return MinOfAffines.of(AFF_ZERO)
    return MinOfAffines(tuple(evaluate_objective(v, c) for v in enumerate_vertices(c)))


def pbd_symbolic(c: ConstraintSet) -> MinOfAffines:
    """Symbolic polymatroid bound: the LP optimum as a min of affine functions of eps.

    Before enumerating vertices the LP is reduced without changing its optimum at any eps:
    rows covered by a constant-zero column are satisfied for free, columns dominated by a
    column with a superset cover and a cost no larger on [0, 1] are removed, and independent
    blocks of rows are solved separately and summed.
    """
    _check_exponents(c)
    rows = set(c.vars)
    cols = [(k.covers, k.exponent) for k in c]
    for cov, e in cols:
        if e.is_zero():
            rows -= cov
    cols = [(cov & rows, e) for cov, e in cols if cov & rows and not e.is_zero()]
    return _solve_reduced(frozenset(cols), frozenset(rows))


@lru_cache(maxsize=200_000)
def _solve_reduced(cols: frozenset, rows: frozenset) -> MinOfAffines:
    if not rows:
        return MinOfAffines.of(AFF_ZERO)
    cl = sorted(cols, key=lambda ce: (sorted(ce[0]), ce[1]))
    kept = []
    for i, (cov, e) in enumerate(cl):
        dominated = False
        for j, (cov2, e2) in enumerate(cl):
            if i == j or not cov <= cov2 or not e2.dominates(e):
                continue
            if (cov2, e2) != (cov, e) and (cov2 != cov or not e.dominates(e2) or j < i):
                dominated = True
                break
        if not dominated:
            kept.append((cov, e))
    # split into independent blocks of rows linked through shared columns
    parent = {r: r for r in rows}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for cov, _ in kept:
        first, *rest = sorted(cov)
        for r in rest:
            parent[find(r)] = find(first)
    blocks: dict[str, list[str]] = {}
    for r in sorted(rows):
        blocks.setdefault(find(r), []).append(r)
    if len(blocks) > 1:
        total = None
        for members in blocks.values():
            ms = frozenset(members)
            part = _solve_reduced(frozenset(ce for ce in kept if ce[0] <= ms), ms)
            total = part if total is None else total.plus(part)
        return total
    row_list = sorted(rows)
    verts = _vertices_of_covers([cov for cov, _ in kept], row_list)
    pieces = []
    for v in verts:
        acc = AFF_ZERO
        for w, (_, e) in zip(v.weights, kept):
            if w:
                acc = acc + e.scale(w)
        pieces.append(acc)
    return MinOfAffines(tuple(pieces))


def fractional_edge_cover(atoms, Yset) -> Fraction:
    """rho*: the fractional edge cover number of ``Yset`` using the given atoms."""
    Yset = frozenset(Yset)
    if not Yset:
        return Fraction(0)
    cons = []
    for a in atoms:
        cov = frozenset(a.schema) & Yset
        if cov:
            cons.append(DegreeConstraint(cov, (), AFF_ONE))
    cs = ConstraintSet(cons)
    if cs.vars != Yset:
        raise InfeasibleLP(f"variables {sorted(Yset - cs.vars)} are not covered by the atoms")
    return pbd_symbolic(cs)(Fraction(0))
