from fractions import Fraction as F

import pytest

from adaptive_ivm import oracle
from adaptive_ivm.degree_constraints import ConstraintSet, DegreeConstraint
from adaptive_ivm.query_model import parse_query
from adaptive_ivm.symbolic import AFF_ONE, EPS

TRI = parse_query("Q(A,B,C) = R(A,B), S(B,C), T(C,A)")


def test_naive_join_by_hand():
    base = {"R": {(1, 2): 2, (1, 3): 1}, "S": {(2, 5): 1, (3, 5): 4}, "T": {(5, 1): 1, (5, 2): 1}}
    assert oracle.naive_join(TRI, base) == {(1, 2, 5): 2, (1, 3, 5): 4}
    assert oracle.naive_join(TRI, {"R": base["R"], "S": base["S"]}) == {}


def test_step_budget(monkeypatch):
    monkeypatch.setattr(oracle, "MAX_STEPS", 5)
    base = {r: {(i, j): 1 for i in range(3) for j in range(3)} for r in "RST"}
    with pytest.raises(oracle.OracleLimit):
        oracle.naive_join(TRI, base)


def test_lp_check_edge_cover():
    c = ConstraintSet(DegreeConstraint(frozenset(z), frozenset(), AFF_ONE) for z in ["AB", "BC", "CA"])
    assert oracle.lp_check(c, F(1, 2)) == F(3, 2)
    light = c.union([DegreeConstraint(frozenset("AB"), frozenset("A"), EPS), DegreeConstraint(frozenset("A"), frozenset(), AFF_ONE)])
    # cover A by |A| and B given A by a light degree, then C via BC
    assert oracle.lp_check(light, F(1, 4)) == F(5, 4)
