"""Multiplicity-annotated relations with support-counted indexes, heavy/light partitions of the
join-variable values, per-signature fragments and the database state."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Iterator

from .query_model import H, L, Degree, DegreeConfiguration, Query, degree_configurations, join_variables


class RejectedUpdate(ValueError):
    """A delete would drive a multiplicity negative; the state is left unchanged."""


class WorkCounter:
    __slots__ = ("ops",)

    def __init__(self):
        self.ops = 0

    def tick(self, n: int = 1):
        self.ops += n


def positions(src: tuple[str, ...], dst: Iterable[str]) -> tuple[int, ...]:
    idx = {v: i for i, v in enumerate(src)}
    return tuple(idx[v] for v in dst)


class Index:
    """Maps a key projection to the distinct value projections below it, with support counts."""

    __slots__ = ("key_pos", "val_pos", "table")

    def __init__(self, key_pos: tuple[int, ...], val_pos: tuple[int, ...]):
        self.key_pos = key_pos
        self.val_pos = val_pos
        self.table: dict[tuple, dict[tuple, int]] = {}

    def _kv(self, t: tuple):
        return tuple(t[i] for i in self.key_pos), tuple(t[i] for i in self.val_pos)

    def add(self, t: tuple):
        k, v = self._kv(t)
        bucket = self.table.get(k)
        if bucket is None:
            self.table[k] = {v: 1}
        else:
            bucket[v] = bucket.get(v, 0) + 1

    def remove(self, t: tuple):
        k, v = self._kv(t)
        bucket = self.table[k]
        c = bucket[v] - 1
        if c:
            bucket[v] = c
        else:
            del bucket[v]
            if not bucket:
                del self.table[k]

    def get(self, key: tuple) -> dict[tuple, int]:
        return self.table.get(key, _EMPTY)


_EMPTY: dict = {}


class Relation:
    """A finite map from tuples over ``schema`` to nonzero integer multiplicities."""

    __slots__ = ("schema", "data", "indexes", "work")

    def __init__(self, schema: Iterable[str], work: WorkCounter | None = None):
        self.schema = tuple(schema)
        self.data: dict[tuple, int] = {}
        self.indexes: dict[tuple[tuple[str, ...], tuple[str, ...]], Index] = {}
        self.work = work if work is not None else WorkCounter()

    def __len__(self) -> int:
        return sum(1 for m in self.data.values() if m > 0)

    def __contains__(self, t) -> bool:
        return t in self.data

    def __iter__(self) -> Iterator[tuple]:
        return iter(self.data)

    def items(self):
        return self.data.items()

    def get(self, t: tuple) -> int:
        self.work.tick()
        return self.data.get(t, 0)

    def add(self, t: tuple, m: int) -> tuple[int, int]:
        """Add ``m`` to the multiplicity of ``t``; returns (old, new)."""
        old = self.data.get(t, 0)
        new = old + m
        self.work.tick()
        if new == 0:
            del self.data[t]
            for ix in self.indexes.values():
                ix.remove(t)
                self.work.tick()
        else:
            self.data[t] = new
            if old == 0:
                for ix in self.indexes.values():
                    ix.add(t)
                    self.work.tick()
        return old, new

    def index(self, key_vars: tuple[str, ...], val_vars: tuple[str, ...]) -> Index:
        k = (tuple(key_vars), tuple(val_vars))
        ix = self.indexes.get(k)
        if ix is None:
            ix = Index(positions(self.schema, key_vars), positions(self.schema, val_vars))
            for t in self.data:
                ix.add(t)
            self.work.tick(len(self.data))
            self.indexes[k] = ix
        return ix

    def lookup(self, key_vars: tuple[str, ...], key: tuple) -> list[tuple]:
        """Full tuples matching ``key`` on ``key_vars`` (sigma_{S=s})."""
        self.work.tick()
        return list(self.index(tuple(key_vars), self.schema).get(key))

    def distinct(self, key_vars: tuple[str, ...], key: tuple, val_vars: tuple[str, ...]) -> dict[tuple, int]:
        """Distinct ``val_vars`` projections among tuples matching ``key``, with support counts."""
        self.work.tick()
        return self.index(tuple(key_vars), tuple(val_vars)).get(key)

    def as_dict(self) -> dict[tuple, int]:
        return dict(self.data)

    def reorder(self, schema: tuple[str, ...]) -> dict[tuple, int]:
        pos = positions(self.schema, schema)
        return {tuple(t[i] for i in pos): m for t, m in self.data.items()}


class Interner:
    """Domain values: integers pass through; other tokens map to ids above the 64-bit range."""

    BASE = 1 << 64

    def __init__(self):
        self.ids: dict[str, int] = {}
        self.names: list[str] = []

    def value(self, token: str) -> int:
        try:
            return int(token)
        except ValueError:
            pass
        i = self.ids.get(token)
        if i is None:
            i = self.BASE + len(self.names)
            self.ids[token] = i
            self.names.append(token)
        return i

    def token(self, v: int) -> str:
        if v >= self.BASE:
            return self.names[v - self.BASE]
        return str(v)


# partition thresholds, all in exact integer arithmetic ------------------------------------------


def _pq(eps: Fraction) -> tuple[int, int]:
    eps = Fraction(eps)
    return eps.numerator, eps.denominator


def exceeds_light_bound(deg: int, M: int, eps: Fraction) -> bool:
    """deg > (3/2) M^eps, i.e. deg > floor((3/2) M^eps) for integer degrees."""
    p, q = _pq(eps)
    return (2 * deg) ** q > 3**q * M**p


def within_heavy_drop(deg: int, M: int, eps: Fraction) -> bool:
    """deg <= (1/2) M^eps, i.e. deg <= floor((1/2) M^eps)."""
    p, q = _pq(eps)
    return (2 * deg) ** q <= M**p


def is_light_at_rebuild(deg: int, M: int, eps: Fraction) -> bool:
    """Strict threshold used when partitions are recomputed: deg <= M^eps."""
    p, q = _pq(eps)
    return deg**q <= M**p


@dataclass
class PartitionState:
    variables: tuple[str, ...]
    degree: dict[str, dict[int, int]] = field(default_factory=dict)
    heavy: dict[str, set[int]] = field(default_factory=dict)

    def __post_init__(self):
        for v in self.variables:
            self.degree.setdefault(v, {})
            self.heavy.setdefault(v, set())

    def label(self, var: str, value) -> Degree:
        return H if value in self.heavy[var] else L

    def light_values(self, var: str) -> set[int]:
        return {x for x, d in self.degree[var].items() if d > 0 and x not in self.heavy[var]}


@dataclass
class RebalanceStats:
    major: int = 0
    minor: int = 0
    migrated: int = 0
    rejected: int = 0
    updates: int = 0


class DatabaseState:
    """Base relations, their heavy/light fragments and the materialized views of the active trees."""

    def __init__(self, query: Query, eps: Fraction, M: int = 1):
        self.query = query
        self.eps = Fraction(eps)
        self.M = M
        self.N = 0
        self.work = WorkCounter()
        self.join_vars = join_variables(query)
        self.partitions = PartitionState(self.join_vars)
        self.base: dict[str, Relation] = {a.relation: Relation(a.schema, self.work) for a in query.atoms}
        self.fragments: dict[str, dict[tuple[Degree, ...], Relation]] = {a.relation: {} for a in query.atoms}
        # config label -> node id -> Relation (leaf nodes point at shared fragments)
        self.materialized: dict[str, dict[int, Relation]] = {}
        self.root_count: dict[str, int] = {}
        self.stats = RebalanceStats()
        self._rel_jv = {a.relation: tuple(v for v in self.join_vars if v in a.vars) for a in query.atoms}
        self._rel_jv_pos = {a.relation: positions(a.schema, self._rel_jv[a.relation]) for a in query.atoms}
        self.configs = degree_configurations(query)
        self.configs_by_label = {d.label(): d for d in self.configs}
        self.engine = None  # compiled helpers, attached by the maintenance engine

    def rel_join_vars(self, rel: str) -> tuple[str, ...]:
        return self._rel_jv[rel]

    def fragment(self, rel: str, sig: tuple[Degree, ...]) -> Relation:
        f = self.fragments[rel].get(sig)
        if f is None:
            f = Relation(self.query.atom(rel).schema, self.work)
            self.fragments[rel][sig] = f
        return f

    def fragment_for(self, rel: str, config: DegreeConfiguration) -> Relation:
        labels = config.as_dict()
        return self.fragment(rel, tuple(labels[v] for v in self._rel_jv[rel]))

    def agreeing_configs(self, rel: str, sig: tuple[Degree, ...]) -> list[DegreeConfiguration]:
        want = dict(zip(self._rel_jv[rel], sig))
        return [d for d in self.configs if all(d[v] is want[v] for v in want)]


def total_degree(var: str, value, state: DatabaseState) -> int:
    if var not in state.partitions.degree:
        raise KeyError(f"{var!r} is not a join variable")
    return state.partitions.degree[var].get(value, 0)


def restriction_signature(rel: str, t: tuple, state: DatabaseState) -> tuple[Degree, ...]:
    pos = state._rel_jv_pos[rel]
    return tuple(state.partitions.label(v, t[i]) for v, i in zip(state._rel_jv[rel], pos))


@dataclass
class BaseUpdateResult:
    signature: tuple[Degree, ...]
    fragment: Relation
    affected: list[DegreeConfiguration]
    appeared: bool
    vanished: bool


def check_update(state: DatabaseState, rel: str, t: tuple, m: int):
    if len(t) != len(state.query.atom(rel).schema):
        raise ValueError(f"arity mismatch for {rel}")
    if m < 0 and state.base[rel].data.get(t, 0) + m < 0:
        raise RejectedUpdate(f"delete of {rel}{t} would make its multiplicity negative")


def apply_base_update(state: DatabaseState, rel: str, t: tuple, m: int) -> BaseUpdateResult:
    """Adjust base relation, fragment, degree counters and N; views are not touched here."""
    check_update(state, rel, t, m)
    sig = restriction_signature(rel, t, state)
    old, new = state.base[rel].add(t, m)
    frag = state.fragment(rel, sig)
    frag.add(t, m)
    appeared = old == 0 and new != 0
    vanished = old != 0 and new == 0
    if appeared or vanished:
        step = 1 if appeared else -1
        state.N += step
        for v, i in zip(state._rel_jv[rel], state._rel_jv_pos[rel]):
            degs = state.partitions.degree[v]
            val = t[i]
            d = degs.get(val, 0) + step
            if d:
                degs[val] = d
            else:
                degs.pop(val, None)
                state.partitions.heavy[v].discard(val)
    return BaseUpdateResult(sig, frag, state.agreeing_configs(rel, sig), appeared, vanished)


def parse_tuple_line(line: str, interner: Interner) -> tuple[str, tuple]:
    parts = line.split()
    if not parts:
        raise ValueError("empty tuple line")
    return parts[0], tuple(interner.value(x) for x in parts[1:])


def read_bulk(lines: Iterable[str], query: Query, interner: Interner) -> list[tuple[str, tuple]]:
    out = []
    for lineno, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        rel, t = parse_tuple_line(line, interner)
        try:
            atom = query.atom(rel)
        except KeyError:
            raise ValueError(f"line {lineno}: unknown relation {rel!r}") from None
        if len(t) != len(atom.schema):
            raise ValueError(f"line {lineno}: {rel} expects {len(atom.schema)} values")
        out.append((rel, t))
    return out
