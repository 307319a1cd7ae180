import pytest

from adaptive_ivm.query_model import (
    H,
    L,
    Atom,
    QuerySyntaxError,
    config_from_label,
    degree_configurations,
    is_hierarchical,
    join_variables,
    parse_query,
    pretty_print,
)

from tables import QUERIES

C4 = "Q(A,B,C,D) = R(A,B), S(B,C), T(C,D), U(D,A)"


def test_parse_four_cycle():
    q = parse_query(C4)
    assert q.name == "Q"
    assert q.free_vars == ("A", "B", "C", "D")
    assert [a.relation for a in q.atoms] == ["R", "S", "T", "U"]
    assert q.atom("U").schema == ("D", "A")


@pytest.mark.parametrize("text", QUERIES.values())
def test_pretty_print_round_trip(text):
    q = parse_query(text)
    assert parse_query(pretty_print(q)) == q


def test_whitespace_is_ignored():
    assert parse_query("Q( A , B ) =R(A,B)") == parse_query("Q(A,B) = R(A,B)")


@pytest.mark.parametrize(
    "text",
    [
        "Q(A,B) = R(A,B), R(B,A)",  # repeated relation
        "Q(A) = R(A,B)",  # body variable missing from the head
        "Q(A,B,C) = R(A,B)",  # head variable missing from the body
        "Q(A,B) = R(A,B",  # unbalanced
        "Q(A,B) R(A,B)",  # no '='
        "",
    ],
)
def test_rejects_malformed(text):
    with pytest.raises(QuerySyntaxError):
        parse_query(text)


def test_error_carries_position():
    with pytest.raises(QuerySyntaxError) as e:
        parse_query("Q(A,B) = R(A,B")
    assert e.value.position >= 0


def test_join_variables():
    assert join_variables(parse_query(C4)) == ("A", "B", "C", "D")
    assert join_variables(parse_query(QUERIES["3-path"])) == ("X2", "X3")
    assert join_variables(parse_query(QUERIES["hierarchical"])) == ("A",)


def test_degree_configurations_cover_all_labelings():
    q = parse_query(C4)
    cs = degree_configurations(q)
    assert len(cs) == 16
    assert len({c.label() for c in cs}) == 16
    assert cs[0].label() == "LLLL" and cs[-1].label() == "HHHH"
    assert len(degree_configurations(parse_query(QUERIES["bow-tie"]))) == 32


def test_config_label_round_trip():
    q = parse_query(C4)
    d = config_from_label(q, "LHHL")
    assert d["A"] is L and d["B"] is H and d["C"] is H and d["D"] is L
    assert d.label() == "LHHL"


def test_hierarchical():
    assert is_hierarchical(parse_query(QUERIES["hierarchical"]))
    for name in ("3-path", "triangle", "4-cycle", "bow-tie"):
        assert not is_hierarchical(parse_query(QUERIES[name]))


def test_atom_vars():
    assert Atom("R", ("A", "B")).vars == frozenset("AB")
