from collections import Counter
from fractions import Fraction as F

from adaptive_ivm.query_model import parse_query
from adaptive_ivm.workloads import StreamSpec, adversarial_instance, layered_instance, random_updates, zipf_stream

from harness import plan

Q = parse_query("Q(A,B,C) = R(A,B), S(B,C), T(C,A)")


def test_streams_are_deterministic():
    assert list(zipf_stream(Q, 7)) == list(zipf_stream(Q, 7))
    assert list(zipf_stream(Q, 7)) != list(zipf_stream(Q, 8))


def test_stream_only_deletes_live_tuples_apart_from_bad_ones():
    live: Counter = Counter()
    bad = 0
    for rel, t, m in zipf_stream(Q, 1, StreamSpec(steps=3000)):
        if m < 0 and min(t) < 0:
            bad += 1
            continue
        live[(rel, t)] += m
        assert live[(rel, t)] >= 0
    assert 5 <= bad <= 80


def test_set_semantics_never_repeats_a_live_tuple():
    live: Counter = Counter()
    for rel, t, m in zipf_stream(Q, 2, StreamSpec(steps=2000, set_semantics=True, bad_delete_rate=0)):
        live[(rel, t)] += m
        assert live[(rel, t)] in (0, 1)


def test_instances():
    rows = layered_instance(Q, 300, F(1, 2), 0)
    assert len(rows) == len(set(rows)) == 300
    p = plan("4-cycle")
    bulk, dom = adversarial_instance(p, 400, 0)
    assert len(bulk) == len(set(bulk))
    assert set(dom) == set(p.query.variables)
    for rel, t in random_updates(p.query, dom, 50, 1):
        assert all(0 <= x < dom[v] for x, v in zip(t, p.query.atom(rel).schema))
