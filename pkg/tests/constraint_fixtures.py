"""Constraint sets of the 4-cycle under configuration (A,B,C,D) = (L,L,H,H), update to R."""

from adaptive_ivm.degree_constraints import derive_constraints, project
from adaptive_ivm.query_model import config_from_label
from adaptive_ivm.view_trees import Leaves

from reference_trees import FOUR_CYCLE as Q4

LLHH = config_from_label(Q4, "LLHH")


def leaves(*rels, delta="R"):
    return Leaves(frozenset(Q4.atom(r) for r in rels), delta)


C1 = derive_constraints(leaves("R", "S"), LLHH, Q4)
C2 = project(C1, "AC")
C3 = derive_constraints(leaves("R", "S", "U"), LLHH, Q4)
C3_ACD = project(C3, "ACD")
C3_ABCD = project(C3, "ABCD")
