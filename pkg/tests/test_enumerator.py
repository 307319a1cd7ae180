import pytest

from adaptive_ivm import maintenance_engine as me
from adaptive_ivm.enumerator import CountModeDisabled, ProbeStats, compute_owners, count, enumerate_query, owner_plan
from adaptive_ivm.view_trees import NodeKind

from harness import plan
from reference_trees import four_cycle_vt1


def node_by_relations(t, rels):
    return [n.id for n in t.nodes if t.subtree_relations(n.id) == frozenset(rels) and n.kind is NodeKind.JOIN][0]


def test_owners_of_first_reference_tree():
    t = four_cycle_vt1()
    own = compute_owners(t)
    assert own["A"] == own["C"] == t.root
    assert own["B"] == node_by_relations(t, "RS")
    assert own["D"] == node_by_relations(t, "TU")


def test_owner_plan_is_preorder_with_bound_keys():
    t = four_cycle_vt1()
    steps, bound = owner_plan(t)
    assert steps[0] == (t.root, (), ("A", "C"))
    assert {s[0] for s in steps[1:]} == {node_by_relations(t, "RS"), node_by_relations(t, "TU")}
    assert all(s[1] == ("A", "C") for s in steps[1:])
    assert sorted(bound) == ["A", "B", "C", "D"]


def test_multiplicity_is_product_of_base_multiplicities():
    p = plan("triangle")
    s = me.new_state(p)
    for rel, t, m in [("R", (1, 2), 2), ("S", (2, 3), 3), ("T", (3, 1), 1), ("R", (4, 2), 1), ("T", (3, 4), 5)]:
        for _ in range(m):
            me.process_update(s, p, rel, t, 1)
    got = dict(enumerate_query(s, p))
    assert got == {(1, 2, 3): 6, (4, 2, 3): 15}
    assert count(s, p) == 21


def test_outputs_of_configurations_are_disjoint():
    p = plan("paw")
    s = me.new_state(p)
    # one hub value in X1 goes heavy while the rest stay light
    for i in range(30):
        me.process_update(s, p, "R1", (1, i), 1)
        me.process_update(s, p, "R2", (i, 7), 1)
        me.process_update(s, p, "R3", (7, 1), 1) if i == 0 else None
        me.process_update(s, p, "R4", (7, i), 1)
    assert s.partitions.heavy["X1"] or s.partitions.heavy["X3"]
    rows = [t for t, _ in enumerate_query(s, p)]
    assert len(rows) == len(set(rows)) == 30 * 30


def test_probe_stats():
    ps = ProbeStats()
    ps.step(3)
    ps.emit()
    ps.step()
    ps.emit()
    ps.step(5)
    ps.close()
    assert (ps.max_gap, ps.emitted) == (5, 2)


def test_count_requires_count_mode():
    p = plan("triangle", count_mode=False)
    with pytest.raises(CountModeDisabled):
        count(me.new_state(p), p)
