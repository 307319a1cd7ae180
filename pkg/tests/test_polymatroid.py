from fractions import Fraction as F

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import linprog

from adaptive_ivm.degree_constraints import ConstraintSet, DegreeConstraint
from adaptive_ivm.oracle import lp_check
from adaptive_ivm.polymatroid import (
    InfeasibleLP,
    enumerate_vertices,
    evaluate_objective,
    fractional_edge_cover,
    pbd_symbolic,
    pbd_symbolic_unreduced,
)
from adaptive_ivm.query_model import parse_query
from adaptive_ivm.symbolic import AFF_ONE, AFF_ZERO, EPS, ONE_MINUS_EPS, AffineExpr, MinOfAffines

from constraint_fixtures import C1, C2, C3_ABCD, C3_ACD

MIN_E = MinOfAffines.of(EPS, ONE_MINUS_EPS)

# reference listing order of C1: (BC|), (BC|B), (C|), (A|), (B|)
REFERENCE_ORDER = ["BC|", "BC|B", "C|", "A|", "B|"]
REFERENCE_VERTICES = {(1, 0, 0, 1, 0), (0, 1, 0, 1, 1), (0, 0, 1, 1, 1)}


def key(k):
    return "".join(sorted(k.Z)) + "|" + "".join(sorted(k.Y))


def test_update_view_vertices():
    ks = list(C1)
    perm = [[key(k) for k in ks].index(name) for name in REFERENCE_ORDER]
    got = {tuple(int(v.weights[i]) for i in perm) for v in enumerate_vertices(C1)}
    assert got == REFERENCE_VERTICES


def test_update_view_bound():
    assert pbd_symbolic(C1) == MIN_E
    assert pbd_symbolic_unreduced(C1) == MIN_E


def test_projected_bound():
    assert pbd_symbolic(C2) == MinOfAffines.of(ONE_MINUS_EPS)


def test_three_atom_bounds():
    two = MinOfAffines.of(AffineExpr(F(0), F(2)), AffineExpr(F(2), F(-2)), AFF_ONE)
    assert pbd_symbolic(C3_ABCD) == two
    for x in (F(0), F(1, 5), F(1, 3), F(1, 2), F(4, 5), F(1)):
        assert two(x) == 2 * MIN_E(x)
    # C costs 1-eps; D costs eps via (AD|A) or 1-eps on its own
    assert pbd_symbolic(C3_ACD) == MinOfAffines.of(AFF_ONE, AffineExpr(F(2), F(-2)))


def test_objective_at_vertices():
    vals = {evaluate_objective(v, C1) for v in enumerate_vertices(C1)}
    assert vals == {AFF_ONE, EPS, ONE_MINUS_EPS}


def test_edge_covers():
    tri = parse_query("Q(A,B,C) = R(A,B), S(B,C), T(C,A)")
    assert fractional_edge_cover(tri.atoms, "ABC") == F(3, 2)
    c4 = parse_query("Q(A,B,C,D) = R(A,B), S(B,C), T(C,D), U(D,A)")
    assert fractional_edge_cover(c4.atoms, "ABCD") == 2
    assert fractional_edge_cover(c4.atoms, "AC") == 2
    assert fractional_edge_cover(c4.atoms, "") == 0
    with pytest.raises(InfeasibleLP):
        fractional_edge_cover(tri.atoms[:1], "C")


def test_empty_set():
    assert pbd_symbolic(ConstraintSet()) == MinOfAffines.of(AFF_ZERO)
    assert lp_check(ConstraintSet(), F(1, 2)) == 0


def test_oracle_at_one_third():
    assert lp_check(C1, F(1, 3)) == F(1, 3)


VARS = "ABCD"
constraint = st.builds(
    lambda z, nY, exp: DegreeConstraint(frozenset(z), frozenset(sorted(z)[: min(nY, len(z) - 1)]), exp),
    st.sets(st.sampled_from(VARS), min_size=1, max_size=3),
    st.integers(0, 2),
    st.sampled_from([AFF_ZERO, AFF_ONE, EPS, ONE_MINUS_EPS, AffineExpr(F(1, 2), F(1, 2))]),
)
eps_values = st.fractions(min_value=0, max_value=1, max_denominator=12)


def feasible(c):
    return all(any(v in k.covers for k in c) for v in c.vars)


@settings(max_examples=150, deadline=None)
@given(st.lists(constraint, min_size=1, max_size=6), eps_values)
def test_presolve_and_oracle_agree(ks, eps):
    c = ConstraintSet(ks)
    if not feasible(c):
        with pytest.raises(InfeasibleLP):
            pbd_symbolic_unreduced(c)
        return
    sym = pbd_symbolic(c)
    assert sym(eps) == pbd_symbolic_unreduced(c)(eps)
    assert sym(eps) == lp_check(c, eps)


@settings(max_examples=60, deadline=None)
@given(st.lists(constraint, min_size=1, max_size=6), eps_values)
def test_floating_point_solver_agrees(ks, eps):
    c = ConstraintSet(ks)
    if not feasible(c):
        return
    vs = sorted(c.vars)
    cost = [float(k.exponent(eps)) for k in c]
    a_ub = [[-1.0 if v in k.covers else 0.0 for k in c] for v in vs]
    res = linprog(cost, A_ub=a_ub, b_ub=[-1.0] * len(vs), bounds=[(0, None)] * len(cost), method="highs")
    assert res.status == 0
    assert abs(res.fun - float(pbd_symbolic(c)(eps))) < 1e-7
