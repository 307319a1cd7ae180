"""Exact-rational affine and piecewise-linear functions of the threshold exponent eps on [0, 1]."""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

ZERO = Fraction(0)
ONE = Fraction(1)


def fmt_rational(x: Fraction) -> str:
    x = Fraction(x)
    return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"


@dataclass(frozen=True, order=True)
class AffineExpr:
    """The function c0 + c1*eps."""

    c0: Fraction = ZERO
    c1: Fraction = ZERO

    def __post_init__(self):
        object.__setattr__(self, "c0", Fraction(self.c0))
        object.__setattr__(self, "c1", Fraction(self.c1))

    @classmethod
    def const(cls, c) -> "AffineExpr":
        return cls(Fraction(c), ZERO)

    def __call__(self, eps) -> Fraction:
        return self.c0 + self.c1 * eps

    def __add__(self, other: "AffineExpr") -> "AffineExpr":
        return AffineExpr(self.c0 + other.c0, self.c1 + other.c1)

    def __sub__(self, other: "AffineExpr") -> "AffineExpr":
        return AffineExpr(self.c0 - other.c0, self.c1 - other.c1)

    def scale(self, k) -> "AffineExpr":
        return AffineExpr(self.c0 * k, self.c1 * k)

    def is_zero(self) -> bool:
        return self.c0 == 0 and self.c1 == 0

    def nonnegative_on_unit(self) -> bool:
        return self.c0 >= 0 and self.c0 + self.c1 >= 0

    def dominates(self, other: "AffineExpr") -> bool:
        """True when self <= other on all of [0, 1]."""
        return self.c0 <= other.c0 and self.c0 + self.c1 <= other.c0 + other.c1

    def intersection(self, other: "AffineExpr") -> Fraction | None:
        dc1 = self.c1 - other.c1
        if dc1 == 0:
            return None
        return (other.c0 - self.c0) / dc1

    def __str__(self) -> str:
        return f"{fmt_rational(self.c0)} + {fmt_rational(self.c1)}*eps"

    def pretty(self) -> str:
        """Compact human form such as ``1-eps`` or ``2eps``."""
        parts = []
        if self.c0 != 0 or self.c1 == 0:
            parts.append(fmt_rational(self.c0))
        if self.c1 != 0:
            coef = "" if abs(self.c1) == 1 else fmt_rational(abs(self.c1))
            sign = "-" if self.c1 < 0 else ("+" if parts else "")
            parts.append(f"{sign}{coef}eps")
        return "".join(parts)


_AFF_RE = re.compile(r"^\s*(-?\d+(?:/\d+)?)\s*\+\s*(-?\d+(?:/\d+)?)\s*\*\s*eps\s*$")


def parse_affine(text: str) -> AffineExpr:
    m = _AFF_RE.match(text)
    if not m:
        raise ValueError(f"malformed affine expression {text!r}")
    return AffineExpr(Fraction(m.group(1)), Fraction(m.group(2)))


EPS = AffineExpr(ZERO, ONE)
ONE_MINUS_EPS = AffineExpr(ONE, -ONE)
AFF_ZERO = AffineExpr()
AFF_ONE = AffineExpr(ONE)


def prune_dominated(pieces: Iterable[AffineExpr]) -> tuple[AffineExpr, ...]:
    """Drop every piece that some other kept piece dominates on [0, 1]."""
    uniq = sorted(set(pieces), key=lambda a: (a.c0, a.c0 + a.c1))
    kept: list[AffineExpr] = []
    for g in uniq:
        if not any(f.dominates(g) for f in kept):
            kept = [f for f in kept if not g.dominates(f)]
            kept.append(g)
    return tuple(sorted(kept))


@dataclass(frozen=True)
class MinOfAffines:
    pieces: tuple[AffineExpr, ...]

    def __post_init__(self):
        if not self.pieces:
            raise ValueError("MinOfAffines needs at least one piece")
        object.__setattr__(self, "pieces", prune_dominated(self.pieces))

    @classmethod
    def of(cls, *pieces: AffineExpr) -> "MinOfAffines":
        return cls(tuple(pieces))

    def __call__(self, eps) -> Fraction:
        return min(p(eps) for p in self.pieces)

    def minimum(self, other: "MinOfAffines") -> "MinOfAffines":
        return MinOfAffines(self.pieces + other.pieces)

    def plus(self, other: "MinOfAffines") -> "MinOfAffines":
        return MinOfAffines(tuple(a + b for a in self.pieces for b in other.pieces))

    def argmin(self, eps) -> AffineExpr:
        return min(self.pieces, key=lambda p: (p(eps), p))

    def to_pl(self) -> "PiecewiseLinear":
        out = PiecewiseLinear.affine(self.pieces[0])
        for p in self.pieces[1:]:
            out = out.minimum(PiecewiseLinear.affine(p))
        return out

    def __str__(self) -> str:
        return "min[" + "; ".join(str(p) for p in self.pieces) + "]"

    def pretty(self) -> str:
        if len(self.pieces) == 1:
            return self.pieces[0].pretty()
        return "min(" + ",".join(p.pretty() for p in self.pieces) + ")"


def parse_min_of_affines(text: str) -> MinOfAffines:
    text = text.strip()
    if not (text.startswith("min[") and text.endswith("]")):
        raise ValueError(f"malformed min-of-affines {text!r}")
    return MinOfAffines(tuple(parse_affine(s) for s in text[4:-1].split(";")))


_COMBINE_CACHE: dict = {}


class PiecewiseLinear:
    """Continuous piecewise-linear function on [0, 1] given by its values at breakpoints.

    The representation is canonical: breakpoints where the slope does not change are removed,
    so two instances are equal exactly when they denote the same function.
    """

    __slots__ = ("xs", "ys", "_hash")

    def __init__(self, xs: Sequence[Fraction], ys: Sequence[Fraction]):
        if len(xs) != len(ys) or len(xs) < 2 or xs[0] != 0 or xs[-1] != 1:
            raise ValueError("breakpoints must start at 0 and end at 1")
        xs2, ys2 = [xs[0]], [ys[0]]
        for i in range(1, len(xs)):
            if xs[i] <= xs2[-1]:
                raise ValueError("breakpoints must be strictly increasing")
            if len(xs2) >= 2:
                # collinear with the previous two points: drop the middle one
                x0, y0, x1, y1 = xs2[-2], ys2[-2], xs2[-1], ys2[-1]
                if (y1 - y0) * (xs[i] - x1) == (ys[i] - y1) * (x1 - x0):
                    xs2[-1], ys2[-1] = xs[i], ys[i]
                    continue
            xs2.append(xs[i])
            ys2.append(ys[i])
        self.xs = tuple(xs2)
        self.ys = tuple(ys2)
        self._hash = None

    @classmethod
    def affine(cls, a: AffineExpr) -> "PiecewiseLinear":
        return cls((ZERO, ONE), (a(ZERO), a(ONE)))

    @classmethod
    def const(cls, c) -> "PiecewiseLinear":
        return cls.affine(AffineExpr.const(c))

    def __call__(self, eps) -> Fraction:
        eps = Fraction(eps)
        xs, ys = self.xs, self.ys
        if eps < 0 or eps > 1:
            raise ValueError("eps outside [0, 1]")
        for i in range(1, len(xs)):
            if eps <= xs[i]:
                x0, x1 = xs[i - 1], xs[i]
                return ys[i - 1] + (ys[i] - ys[i - 1]) * (eps - x0) / (x1 - x0)
        return ys[-1]

    @property
    def breakpoints(self) -> tuple[Fraction, ...]:
        return self.xs

    def segments(self) -> list[tuple[Fraction, Fraction, AffineExpr]]:
        out = []
        for i in range(1, len(self.xs)):
            x0, x1, y0, y1 = self.xs[i - 1], self.xs[i], self.ys[i - 1], self.ys[i]
            slope = (y1 - y0) / (x1 - x0)
            out.append((x0, x1, AffineExpr(y0 - slope * x0, slope)))
        return out

    def values_at(self, points: Sequence[Fraction]) -> list[Fraction]:
        """Values at sorted points in [0, 1], by a single merge walk."""
        xs, ys = self.xs, self.ys
        out = []
        i = 1
        for x in points:
            while xs[i] < x:
                i += 1
            if x == xs[i]:
                out.append(ys[i])
            elif x == xs[i - 1]:
                out.append(ys[i - 1])
            else:
                x0, x1 = xs[i - 1], xs[i]
                out.append(ys[i - 1] + (ys[i] - ys[i - 1]) * (x - x0) / (x1 - x0))
        return out

    def _combine(self, other: "PiecewiseLinear", is_max: bool) -> "PiecewiseLinear":
        if self is other or (self.xs == other.xs and self.ys == other.ys):
            return self
        key = (self, other, is_max)
        hit = _COMBINE_CACHE.get(key)
        if hit is not None:
            return hit
        xs = sorted(set(self.xs) | set(other.xs))
        a = self.values_at(xs)
        b = other.values_at(xs)
        if all(p >= q for p, q in zip(a, b)):
            res = self if is_max else other
        elif all(p <= q for p, q in zip(a, b)):
            res = other if is_max else self
        else:
            pick = max if is_max else min
            out_x, out_y = [xs[0]], [pick(a[0], b[0])]
            for i in range(1, len(xs)):
                d0, d1 = a[i - 1] - b[i - 1], a[i] - b[i]
                if (d0 < 0 < d1) or (d1 < 0 < d0):
                    t = d0 / (d0 - d1)
                    out_x.append(xs[i - 1] + t * (xs[i] - xs[i - 1]))
                    out_y.append(a[i - 1] + t * (a[i] - a[i - 1]))
                out_x.append(xs[i])
                out_y.append(pick(a[i], b[i]))
            res = PiecewiseLinear(out_x, out_y)
        if len(_COMBINE_CACHE) > 500_000:
            _COMBINE_CACHE.clear()
        _COMBINE_CACHE[key] = res
        return res

    def maximum(self, other: "PiecewiseLinear") -> "PiecewiseLinear":
        return self._combine(other, True)

    def minimum(self, other: "PiecewiseLinear") -> "PiecewiseLinear":
        return self._combine(other, False)

    def minimize(self) -> tuple[Fraction, Fraction]:
        """Return (min value, smallest minimizer); the minimum sits at a breakpoint."""
        best = min(self.ys)
        return best, self.xs[self.ys.index(best)]

    def __eq__(self, other) -> bool:
        if isinstance(other, MinOfAffines):
            other = other.to_pl()
        if not isinstance(other, PiecewiseLinear):
            return NotImplemented
        return self.xs == other.xs and self.ys == other.ys

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash((self.xs, self.ys))
        return self._hash

    def __repr__(self) -> str:
        pts = ", ".join(f"({fmt_rational(x)}, {fmt_rational(y)})" for x, y in zip(self.xs, self.ys))
        return f"PL[{pts}]"

    def pretty(self) -> str:
        return " | ".join(
            f"[{fmt_rational(x0)},{fmt_rational(x1)}]: {a.pretty()}" for x0, x1, a in self.segments()
        )


def pl_max(funcs: Iterable[PiecewiseLinear]) -> PiecewiseLinear:
    it = iter(funcs)
    out = next(it)
    for f in it:
        out = out.maximum(f)
    return out


def pl_min(funcs: Iterable[PiecewiseLinear]) -> PiecewiseLinear:
    it = iter(funcs)
    out = next(it)
    for f in it:
        out = out.minimum(f)
    return out
