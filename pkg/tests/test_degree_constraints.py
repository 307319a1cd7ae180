from itertools import combinations

import networkx as nx
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from adaptive_ivm.degree_constraints import (
    CombinatorialLimit,
    ConstraintSet,
    DegreeConstraint,
    constraint_graph,
    derive_constraints,
    is_acyclic,
    maximal_acyclic_subsets,
    parse_constraint,
    parse_constraint_set,
    project,
    topological_order,
)
from adaptive_ivm.query_model import DegreeConfiguration, config_from_label
from adaptive_ivm.symbolic import AFF_ONE, AFF_ZERO, EPS, ONE_MINUS_EPS

from constraint_fixtures import C1, C2, C3_ABCD, C3_ACD, LLHH, Q4, leaves


def dc(z, y, e):
    return DegreeConstraint(frozenset(z), frozenset(y), e)


def test_derive_update_view():
    assert C1 == ConstraintSet(
        [dc("BC", "", AFF_ONE), dc("BC", "B", EPS), dc("C", "", ONE_MINUS_EPS), dc("A", "", AFF_ZERO), dc("B", "", AFF_ZERO)]
    )


def test_derive_without_delta_has_size_constraints():
    c = derive_constraints(leaves("S", "T", delta=None), LLHH)
    assert dc("BC", "", AFF_ONE) in c and dc("CD", "", AFF_ONE) in c
    assert dc("C", "", ONE_MINUS_EPS) in c and dc("D", "", ONE_MINUS_EPS) in c


def test_derive_rejects_wrong_configuration():
    bad = DegreeConfiguration(("A", "B"), tuple(config_from_label(Q4, "LLHH").assignment[:2]))
    with pytest.raises(ValueError):
        derive_constraints(leaves("R", "S"), bad, Q4)


def test_projection():
    assert C2 == ConstraintSet([dc("C", "", AFF_ONE), dc("C", "", ONE_MINUS_EPS), dc("A", "", AFF_ZERO)])
    assert dc("AD", "A", EPS) in C3_ACD and dc("D", "", ONE_MINUS_EPS) in C3_ACD
    assert C3_ABCD == C1.union([dc("D", "", ONE_MINUS_EPS), dc("AD", "", AFF_ONE), dc("AD", "A", EPS)])
    # a light constraint whose Z shrinks to its Y disappears
    assert project(ConstraintSet([dc("AB", "A", EPS)]), "A") == ConstraintSet()


def test_graph_and_order():
    g = constraint_graph(C3_ABCD)
    assert set(g.edges) == {("B", "C"), ("A", "D")}
    order = topological_order(C3_ABCD)
    assert order.index("B") < order.index("C") and order.index("A") < order.index("D")


def test_cyclic_set_has_several_maximal_subsets():
    c = ConstraintSet([dc("AB", "A", EPS), dc("AB", "B", EPS), dc("A", "", AFF_ONE), dc("B", "", AFF_ONE)])
    assert not is_acyclic(c)
    subs = maximal_acyclic_subsets(c)
    assert len(subs) == 2
    for s in subs:
        assert is_acyclic(s)
        assert dc("A", "", AFF_ONE) in s and dc("B", "", AFF_ONE) in s


def test_acyclic_set_is_its_own_maximal_subset():
    assert maximal_acyclic_subsets(C1) == [C1]


def test_order_limit():
    vs = "ABCDEFGHI"
    cyc = ConstraintSet(dc(a + b, a, EPS) for a, b in zip(vs, vs[1:] + vs[0]))
    with pytest.raises(CombinatorialLimit):
        maximal_acyclic_subsets(cyc)


def test_parse_round_trip():
    for k in C3_ABCD:
        assert parse_constraint(str(k)) == k
    assert parse_constraint_set(C3_ABCD.serialize()) == C3_ABCD
    assert parse_constraint_set("") == ConstraintSet()


VARS = "ABCD"
constraint = st.builds(
    lambda z, ysel, exp: dc(z, [v for v, keep in zip(sorted(z), ysel) if keep][: len(z) - 1], exp),
    st.sets(st.sampled_from(VARS), min_size=1, max_size=3).map(lambda s: "".join(sorted(s))),
    st.lists(st.booleans(), min_size=3, max_size=3),
    st.sampled_from([AFF_ONE, EPS, ONE_MINUS_EPS]),
)


def brute_force_maximal(c: ConstraintSet) -> set[ConstraintSet]:
    def acyclic(ks):
        g = nx.DiGraph()
        for k in ks:
            g.add_edges_from((y, z) for y in k.Y for z in k.Z - k.Y)
        return nx.is_directed_acyclic_graph(g)

    items = list(c)
    good = [frozenset(s) for r in range(len(items) + 1) for s in combinations(items, r) if acyclic(s)]
    return {ConstraintSet(s) for s in good if not any(s < t for t in good)}


@settings(max_examples=150, deadline=None)
@given(st.lists(constraint, min_size=1, max_size=7))
def test_maximal_acyclic_subsets_match_brute_force(ks):
    c = ConstraintSet(ks)
    assert set(maximal_acyclic_subsets(c)) == brute_force_maximal(c)
