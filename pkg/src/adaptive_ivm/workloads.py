"""Seeded update streams and benchmark instances."""

from __future__ import annotations

import random
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator

from .query_model import Query


def zipf_weights(n: int, s: float) -> list[float]:
    return [1.0 / (k**s) for k in range(1, n + 1)]


@dataclass
class StreamSpec:
    steps: int = 2000
    domain: int = 40
    free_domain: int = 1000  # variables of a single atom draw uniformly from this range
    # repeating phases of (length, insert probability, Zipf exponent)
    phases: tuple[tuple[int, float, float], ...] = ((150, 0.8, 1.5), (500, 0.5, 1.5), (150, 0.2, 1.5))
    set_semantics: bool = False
    bad_delete_rate: float = 0.01
    rotate: bool = True  # reshuffle which values are popular at every phase change


def zipf_stream(q: Query, seed: int, spec: StreamSpec | None = None) -> Iterator[tuple[str, tuple, int]]:
    """Mixed inserts and deletes with Zipf-distributed values.

    The stream cycles through phases that grow, churn and shrink the database, so its size
    crosses the rebuild bounds in both directions while the skew keeps a few values heavy.  With
    ``rotate`` the popular values change at every phase boundary: formerly hot values cool down
    under uniform deletes while others heat up.  A small fraction of deletes target absent tuples
    (these must be rejected).  Only join variables are skewed; the others are uniform over a wide
    range, which keeps tuples distinct without inflating the output.
    """
    spec = spec or StreamSpec()
    rng = random.Random(seed)
    join_vars = {v for v in q.variables if len(q.atoms_of(v)) > 1}
    values = list(range(1, spec.domain + 1))
    weights = {s: zipf_weights(spec.domain, s) for _, _, s in spec.phases}
    bounds = []
    at = 0
    for length, p, s in spec.phases:
        bounds.append((at, at + length, p, s))
        at += length
    cycle = at
    live: list[tuple[str, tuple]] = []
    where: dict[tuple[str, tuple], int] = {}
    mult: dict[tuple[str, tuple], int] = {}
    for step in range(spec.steps):
        pos = step % cycle
        lo, _, p_insert, skew = next(b for b in bounds if b[0] <= pos < b[1])
        if spec.rotate and step and pos == lo:
            rng.shuffle(values)
        w = weights[skew]
        if rng.random() < spec.bad_delete_rate:
            a = rng.choice(q.atoms)
            t = tuple(-1 - rng.randrange(5) for _ in a.schema)
            yield a.relation, t, -1
            continue
        if live and rng.random() >= p_insert:
            key = live[rng.randrange(len(live))]
            mult[key] -= 1
            if mult[key] == 0:
                del mult[key]
                i = where.pop(key)
                last = live.pop()
                if i < len(live):
                    live[i] = last
                    where[last] = i
            yield key[0], key[1], -1
            continue
        a = rng.choice(q.atoms)
        t = tuple(
            rng.choices(values, w)[0] if v in join_vars else rng.randrange(1, spec.free_domain + 1)
            for v in a.schema
        )
        key = (a.relation, t)
        if key in mult:
            if spec.set_semantics:
                continue
            mult[key] += 1
        else:
            mult[key] = 1
            where[key] = len(live)
            live.append(key)
        yield a.relation, t, 1


def layered_instance(q: Query, n: int, eps: Fraction, seed: int) -> list[tuple[str, tuple]]:
    """About ``n`` distinct tuples where every join value has degree close to the light bound.

    Each relation gets n / |atoms| tuples whose columns draw from a domain sized so that a value
    appears about k = 0.4 (2n+1)^eps times per relation.  Chains of such values are what make
    light-side delta computations expensive.
    """
    rng = random.Random(seed)
    per = max(1, n // len(q.atoms))
    k = max(1, int(0.4 * float(2 * n + 1) ** float(eps)))
    dom = max(1, per // k)
    out = []
    for a in q.atoms:
        seen = set()
        tries = 0
        while len(seen) < per and tries < 20 * per:
            tries += 1
            t = tuple(rng.randrange(dom) for _ in a.schema)
            if t not in seen:
                seen.add(t)
                out.append((a.relation, t))
    return out


def probe_updates(q: Query, count: int, domain: int, seed: int) -> list[tuple[str, tuple]]:
    rng = random.Random(seed)
    out = []
    for _ in range(count):
        a = rng.choice(q.atoms)
        out.append((a.relation, tuple(rng.randrange(domain) for _ in a.schema)))
    return out


def adversarial_instance(plan, n: int, seed: int) -> tuple[list[tuple[str, tuple]], dict[str, int]]:
    """An instance shaped after the most expensive configuration at the plan's eps.

    Join variables labelled heavy there get values of total degree about 3 M^eps, light ones
    about M^eps / 2, where M = 2n + 1 is the threshold base right after the initial build.
    Returns the tuples and the per-variable domain sizes (for generating probe updates).
    """
    q = plan.query
    eps = plan.epsilon_star
    worst = max(plan.configs.values(), key=lambda cp: cp.cost(eps))
    labels = worst.config.as_dict()
    per = max(1, n // len(q.atoms))
    base = float(2 * n + 1) ** float(eps)
    dom = {}
    for v in q.variables:
        deg_at = len(q.atoms_of(v))
        if v not in labels:
            k = 1.0
        elif labels[v].value == "H":
            k = 3.0 * base / deg_at
        else:
            k = 0.5 * base / deg_at
        dom[v] = max(1, int(per / max(k, 1.0)))
    rng = random.Random(seed)
    out = []
    for a in q.atoms:
        seen = set()
        space = 1
        for v in a.schema:
            space *= dom[v]
        target = min(per, space)
        while len(seen) < target:
            t = tuple(rng.randrange(dom[v]) for v in a.schema)
            if t not in seen:
                seen.add(t)
                out.append((a.relation, t))
    return out, dom


def random_updates(q: Query, dom: dict[str, int], count: int, seed: int) -> list[tuple[str, tuple]]:
    rng = random.Random(seed)
    out = []
    for _ in range(count):
        a = rng.choice(q.atoms)
        out.append((a.relation, tuple(rng.randrange(dom[v]) for v in a.schema)))
    return out
