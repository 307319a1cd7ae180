"""Join queries, atoms, join variables and heavy/light degree configurations."""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass, field
from enum import Enum


class QuerySyntaxError(ValueError):
    """Raised when query text cannot be parsed; carries the character offset."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at position {position})")
        self.position = position


class Degree(str, Enum):
    LIGHT = "L"
    HEAVY = "H"

    def __lt__(self, other: "Degree") -> bool:  # L < H
        return self.value == "L" and other.value == "H"

    def __repr__(self) -> str:
        return self.value


L = Degree.LIGHT
H = Degree.HEAVY


@dataclass(frozen=True)
class Atom:
    relation: str
    schema: tuple[str, ...]

    def __post_init__(self):
        if len(set(self.schema)) != len(self.schema):
            raise ValueError(f"repeated variable in atom {self}")

    @property
    def vars(self) -> frozenset[str]:
        return frozenset(self.schema)

    def __str__(self) -> str:
        return f"{self.relation}({','.join(self.schema)})"


@dataclass(frozen=True)
class Query:
    name: str
    free_vars: tuple[str, ...]
    atoms: tuple[Atom, ...]
    _atom_index: dict = field(default=None, compare=False, hash=False, repr=False)

    def __post_init__(self):
        if not self.atoms:
            raise ValueError("a query needs at least one atom")
        names = [a.relation for a in self.atoms]
        if len(set(names)) != len(names):
            dup = next(n for n in names if names.count(n) > 1)
            raise ValueError(f"duplicate relation symbol {dup!r}")
        body = set().union(*(a.vars for a in self.atoms))
        if set(self.free_vars) != body or len(set(self.free_vars)) != len(self.free_vars):
            raise ValueError("head variables must equal the union of body variables")
        object.__setattr__(self, "_atom_index", {a.relation: a for a in self.atoms})

    def atom(self, relation: str) -> Atom:
        try:
            return self._atom_index[relation]
        except KeyError:
            raise KeyError(f"unknown relation {relation!r}") from None

    @property
    def variables(self) -> tuple[str, ...]:
        return tuple(sorted(self.free_vars))

    def atoms_of(self, var: str) -> frozenset[str]:
        """Relation names of the atoms whose schema contains ``var``."""
        return frozenset(a.relation for a in self.atoms if var in a.schema)

    def __str__(self) -> str:
        return pretty_print(self)


@dataclass(frozen=True)
class DegreeConfiguration:
    """Heavy/light label per join variable, aligned with ``join_variables``."""

    variables: tuple[str, ...]
    assignment: tuple[Degree, ...]

    def __post_init__(self):
        if len(self.variables) != len(self.assignment):
            raise ValueError("assignment length must equal number of join variables")

    def __getitem__(self, var: str) -> Degree:
        return self.assignment[self.variables.index(var)]

    def as_dict(self) -> dict[str, Degree]:
        return dict(zip(self.variables, self.assignment))

    def restrict(self, variables) -> tuple[tuple[str, Degree], ...]:
        vs = set(variables)
        return tuple((v, d) for v, d in zip(self.variables, self.assignment) if v in vs)

    def label(self) -> str:
        return "".join(d.value for d in self.assignment)

    def __str__(self) -> str:
        return "(" + ",".join(d.value for d in self.assignment) + ")"


_IDENT = r"[A-Za-z_][A-Za-z0-9_]*"


class _Scanner:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0

    def skip(self):
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1

    def ident(self) -> str:
        self.skip()
        m = re.compile(_IDENT).match(self.text, self.pos)
        if not m:
            raise QuerySyntaxError("expected identifier", self.pos)
        self.pos = m.end()
        return m.group(0)

    def expect(self, s: str):
        self.skip()
        if not self.text.startswith(s, self.pos):
            raise QuerySyntaxError(f"expected {s!r}", self.pos)
        self.pos += len(s)

    def peek(self, s: str) -> bool:
        self.skip()
        return self.text.startswith(s, self.pos)

    def at_end(self) -> bool:
        self.skip()
        return self.pos >= len(self.text)

    def var_list(self) -> tuple[str, ...]:
        self.expect("(")
        out = []
        if not self.peek(")"):
            out.append(self.ident())
            while self.peek(","):
                self.expect(",")
                out.append(self.ident())
        self.expect(")")
        return tuple(out)


def parse_query(text: str) -> Query:
    """Parse ``Name(V1,...) = R1(A,B), R2(B,C), ...``."""
    sc = _Scanner(text)
    name = sc.ident()
    head = sc.var_list()
    sc.expect("=")
    atoms = []
    seen = set()
    while True:
        start = sc.pos
        rel = sc.ident()
        if rel in seen:
            raise QuerySyntaxError(f"duplicate relation symbol {rel!r}", start)
        seen.add(rel)
        schema = sc.var_list()
        if len(set(schema)) != len(schema):
            raise QuerySyntaxError(f"repeated variable in atom {rel}", start)
        atoms.append(Atom(rel, schema))
        if sc.peek(","):
            sc.expect(",")
            continue
        break
    if not sc.at_end():
        raise QuerySyntaxError("trailing input", sc.pos)
    body = set().union(*(a.vars for a in atoms))
    if set(head) != body or len(set(head)) != len(head):
        raise QuerySyntaxError("head variables must equal the union of body variables", 0)
    return Query(name, head, tuple(atoms))


def pretty_print(q: Query) -> str:
    return f"{q.name}({','.join(q.free_vars)}) = " + ", ".join(str(a) for a in q.atoms)


def join_variables(q: Query) -> tuple[str, ...]:
    return tuple(v for v in q.variables if len(q.atoms_of(v)) >= 2)


def degree_configurations(q: Query) -> list[DegreeConfiguration]:
    jv = join_variables(q)
    return [DegreeConfiguration(jv, combo) for combo in itertools.product((L, H), repeat=len(jv))]


def is_hierarchical(q: Query) -> bool:
    vs = q.variables
    for x, y in itertools.combinations(vs, 2):
        ax, ay = q.atoms_of(x), q.atoms_of(y)
        if not (ax <= ay or ay <= ax or not (ax & ay)):
            return False
    return True


def config_from_label(q: Query, label: str) -> DegreeConfiguration:
    """Build a configuration from a string such as ``"LLHH"``."""
    jv = join_variables(q)
    if len(label) != len(jv):
        raise ValueError(f"label {label!r} does not match join variables {jv}")
    return DegreeConfiguration(jv, tuple(Degree(ch) for ch in label))
