"""Degree constraints (Z | Y, N^p): derivation from leaves, projection, constraint graphs and
maximal acyclic subsets."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable

import networkx as nx

from .query_model import H, L, DegreeConfiguration, Query, join_variables
from .symbolic import AFF_ONE, AFF_ZERO, EPS, ONE_MINUS_EPS, AffineExpr, parse_affine
from .view_trees import Leaves

MAX_ACYCLIC_SUBSETS = 10_000
MAX_ORDER_VARS = 8


class CombinatorialLimit(RuntimeError):
    pass


@dataclass(frozen=True)
class DegreeConstraint:
    Z: frozenset[str]
    Y: frozenset[str]
    exponent: AffineExpr

    def __post_init__(self):
        object.__setattr__(self, "Z", frozenset(self.Z))
        object.__setattr__(self, "Y", frozenset(self.Y))
        if not self.Y < self.Z:
            raise ValueError(f"Y must be a proper subset of Z in {self}")

    @property
    def covers(self) -> frozenset[str]:
        """Variables whose covering row this constraint contributes to, i.e. Z - Y."""
        return self.Z - self.Y

    def sort_key(self):
        return (tuple(sorted(self.Z)), tuple(sorted(self.Y)), self.exponent)

    def __str__(self) -> str:
        return f"({','.join(sorted(self.Z))}|{','.join(sorted(self.Y))}, {self.exponent})"


def parse_constraint(text: str) -> DegreeConstraint:
    """Inverse of ``str(DegreeConstraint)``: ``(B,C|B, 0 + 1*eps)``."""
    text = text.strip()
    if not (text.startswith("(") and text.endswith(")")) or "|" not in text:
        raise ValueError(f"malformed constraint {text!r}")
    zpart, rest = text[1:-1].split("|", 1)
    ypart, exp = rest.split(", ", 1)

    def names(s: str) -> frozenset[str]:
        return frozenset(v for v in s.split(",") if v)

    return DegreeConstraint(names(zpart), names(ypart), parse_affine(exp))


class ConstraintSet:
    """An ordered, duplicate-free collection of degree constraints."""

    __slots__ = ("constraints", "_key")

    def __init__(self, constraints: Iterable[DegreeConstraint] = ()):
        self.constraints: tuple[DegreeConstraint, ...] = tuple(
            sorted(set(constraints), key=DegreeConstraint.sort_key)
        )
        self._key = None

    @property
    def vars(self) -> frozenset[str]:
        return frozenset().union(*(c.Z for c in self.constraints)) if self.constraints else frozenset()

    def __iter__(self):
        return iter(self.constraints)

    def __len__(self) -> int:
        return len(self.constraints)

    def __contains__(self, c) -> bool:
        return c in set(self.constraints)

    def __eq__(self, other) -> bool:
        return isinstance(other, ConstraintSet) and self.constraints == other.constraints

    def __hash__(self) -> int:
        return hash(self.constraints)

    def __repr__(self) -> str:
        return "{" + ", ".join(str(c) for c in self.constraints) + "}"

    def union(self, other: Iterable[DegreeConstraint]) -> "ConstraintSet":
        return ConstraintSet(self.constraints + tuple(other))

    def light(self) -> tuple[DegreeConstraint, ...]:
        return tuple(c for c in self.constraints if c.Y)

    def serialize(self) -> str:
        return "; ".join(str(c) for c in self.constraints)


def parse_constraint_set(text: str) -> ConstraintSet:
    text = text.strip()
    if not text:
        return ConstraintSet()
    return ConstraintSet(parse_constraint(s) for s in text.split(";"))


def derive_constraints(
    leaves: Leaves, config: DegreeConfiguration, query: Query | None = None
) -> ConstraintSet:
    if query is not None and tuple(config.variables) != join_variables(query):
        bad = set(config.variables) - set(join_variables(query))
        raise ValueError(f"configuration variables {sorted(bad) or config.variables} are not the join variables")
    labels = config.as_dict()
    out: list[DegreeConstraint] = []
    for atom in sorted(leaves.atoms, key=lambda a: a.relation):
        xs = atom.vars
        if leaves.is_delta(atom):
            out.extend(DegreeConstraint({a}, (), AFF_ZERO) for a in xs)
            continue
        out.append(DegreeConstraint(xs, (), AFF_ONE))
        for y in sorted(xs):
            if y not in labels:
                continue
            if labels[y] is L:
                out.append(DegreeConstraint(xs, {y}, EPS))
            elif labels[y] is H:
                out.append(DegreeConstraint({y}, (), ONE_MINUS_EPS))
    return ConstraintSet(out)


def project(c: ConstraintSet, V) -> ConstraintSet:
    V = frozenset(V)
    out = []
    for k in c:
        z = k.Z & V
        if k.Y < z:
            out.append(DegreeConstraint(z, k.Y, k.exponent))
    return ConstraintSet(out)


def constraint_graph(c: ConstraintSet) -> nx.DiGraph:
    g = nx.DiGraph()
    g.add_nodes_from(sorted(c.vars))
    for k in c:
        for y in k.Y:
            for z in k.covers:
                g.add_edge(y, z)
    return g


def is_acyclic(c: ConstraintSet) -> bool:
    return nx.is_directed_acyclic_graph(constraint_graph(c))


def topological_order(c: ConstraintSet) -> list[str]:
    return list(nx.lexicographical_topological_sort(constraint_graph(c)))


_MAS_CACHE: dict[ConstraintSet, list[ConstraintSet]] = {}


def maximal_acyclic_subsets(c: ConstraintSet) -> list[ConstraintSet]:
    hit = _MAS_CACHE.get(c)
    if hit is None:
        hit = _maximal_acyclic_subsets(c)
        if len(_MAS_CACHE) > 100_000:
            _MAS_CACHE.clear()
        _MAS_CACHE[c] = hit
    return list(hit)


def _maximal_acyclic_subsets(c: ConstraintSet) -> list[ConstraintSet]:
    """Maximal subsets with an acyclic constraint graph.

    A subset is acyclic exactly when it is compatible with some linear order of the variables
    (every Y precedes every variable of Z - Y). The maximal acyclic subsets are therefore the
    inclusion-maximal sets among the compatible sets of all orders of the variables that carry
    edges; constraints with empty Y add no edges and belong to every result.
    """
    light = c.light()
    base = [k for k in c if not k.Y]
    if is_acyclic(ConstraintSet(light)):
        return [c]
    involved = sorted(set().union(*(k.Z for k in light)))
    if len(involved) > MAX_ORDER_VARS:
        raise CombinatorialLimit(f"{len(involved)} variables carry edges; limit is {MAX_ORDER_VARS}")
    index = {v: i for i, v in enumerate(involved)}
    edges = [([index[y] for y in k.Y], [index[z] for z in k.covers]) for k in light]
    candidates: set[frozenset[int]] = set()
    for perm in itertools.permutations(range(len(involved))):
        rank = [0] * len(perm)
        for pos, v in enumerate(perm):
            rank[v] = pos
        chosen = frozenset(
            i for i, (ys, zs) in enumerate(edges)
            if max(rank[y] for y in ys) < min(rank[z] for z in zs)
        )
        candidates.add(chosen)
    maximal = [s for s in candidates if not any(s < t for t in candidates)]
    if len(maximal) > MAX_ACYCLIC_SUBSETS:
        raise CombinatorialLimit(f"{len(maximal)} maximal acyclic subsets exceed {MAX_ACYCLIC_SUBSETS}")
    out = [ConstraintSet(base + [light[i] for i in sorted(s)]) for s in maximal]
    out.sort(key=lambda cs: tuple(k.sort_key() for k in cs))
    return out
