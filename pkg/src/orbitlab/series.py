"""Exact rational power series and the spiral-orbit expansion.

Writing the radius of a slowly decaying spiral as

    r(t) = (M^2/c) e^{-2 delta t} rho(x),    x = delta^2 (M^6/c^4) e^{-6 delta t},

and using d/dt = -6 delta x d/dx on rho, the radial equation multiplied by r^3
collapses to a parameter-free identity in x alone:

    x rho^3 (2 rho + 18 D rho + 36 D^2 rho) + rho - 1 = 0,    D = x d/dx.

With rho = sum (-1)^n C_n x^n every coefficient C_n is fixed by C_0..C_{n-1}.
All arithmetic here is over :class:`fractions.Fraction`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Optional, Sequence, Union

Number = Union[int, Fraction]


class SeriesOrderError(ValueError):
    """Two series with different truncation orders were combined."""


class ZeroPivotError(ArithmeticError):
    """The coefficient multiplying C_n in the order-n equation vanished."""


class RationalSeries:
    """Truncated power series sum_{k<=N} a_k x^k with exact rational coefficients."""

    __slots__ = ("coeffs",)

    def __init__(self, coeffs: Iterable[Number], order: Optional[int] = None):
        cs = [Fraction(c) for c in coeffs]
        if order is not None:
            if order < 0:
                raise ValueError("order must be >= 0")
            cs = (cs + [Fraction(0)] * (order + 1))[: order + 1]
        if not cs:
            raise ValueError("a series needs at least one coefficient")
        self.coeffs = tuple(cs)

    @classmethod
    def constant(cls, value: Number, order: int) -> "RationalSeries":
        return cls([value], order)

    @classmethod
    def x(cls, order: int) -> "RationalSeries":
        return cls([0, 1], order)

    @property
    def order(self) -> int:
        return len(self.coeffs) - 1

    def __len__(self):
        return len(self.coeffs)

    def __getitem__(self, k: int) -> Fraction:
        return self.coeffs[k]

    def __eq__(self, other):
        return isinstance(other, RationalSeries) and self.coeffs == other.coeffs

    def __hash__(self):
        return hash(self.coeffs)

    def __repr__(self):
        return f"RationalSeries([{', '.join(str(c) for c in self.coeffs)}])"

    def _same_order(self, other: "RationalSeries") -> None:
        if self.order != other.order:
            raise SeriesOrderError(f"order mismatch: {self.order} vs {other.order}")

    def __add__(self, other: "RationalSeries") -> "RationalSeries":
        self._same_order(other)
        return RationalSeries(a + b for a, b in zip(self.coeffs, other.coeffs))

    def __sub__(self, other: "RationalSeries") -> "RationalSeries":
        self._same_order(other)
        return RationalSeries(a - b for a, b in zip(self.coeffs, other.coeffs))

    def __neg__(self) -> "RationalSeries":
        return RationalSeries(-a for a in self.coeffs)

    def __mul__(self, other):
        if isinstance(other, (int, Fraction)):
            return self.scale(other)
        self._same_order(other)
        a, b = self.coeffs, other.coeffs
        return RationalSeries(sum(a[i] * b[k - i] for i in range(k + 1)) for k in range(len(a)))

    __rmul__ = __mul__

    def scale(self, s: Number) -> "RationalSeries":
        s = Fraction(s)
        return RationalSeries(s * a for a in self.coeffs)

    def derivative(self) -> "RationalSeries":
        """d/dx; the result has order N-1 (order 0 stays a zero constant)."""
        if self.order == 0:
            return RationalSeries([0])
        return RationalSeries(k * self.coeffs[k] for k in range(1, len(self.coeffs)))

    def euler(self) -> "RationalSeries":
        """x d/dx at the same order."""
        return RationalSeries(k * a for k, a in enumerate(self.coeffs))

    def shift(self, k: int = 1) -> "RationalSeries":
        """Multiply by x^k, truncating at the current order."""
        return RationalSeries([0] * k + list(self.coeffs), self.order)

    def with_order(self, order: int) -> "RationalSeries":
        return RationalSeries(self.coeffs, order)

    def lowest_nonzero(self) -> Optional[int]:
        for k, a in enumerate(self.coeffs):
            if a != 0:
                return k
        return None

    def __call__(self, x: float) -> float:
        acc = 0.0
        for a in reversed(self.coeffs):
            acc = acc * x + float(a)
        return acc


def series_add(a: RationalSeries, b: RationalSeries) -> RationalSeries:
    return a + b


def series_mul(a: RationalSeries, b: RationalSeries) -> RationalSeries:
    return a * b


def series_scalar_mul(a: RationalSeries, s: Number) -> RationalSeries:
    return a.scale(s)


def series_x_derivative(a: RationalSeries) -> RationalSeries:
    return a.derivative()


@dataclass(frozen=True)
class SpiralCoefficients:
    C: tuple[Fraction, ...]

    @property
    def N(self) -> int:
        return len(self.C) - 1

    @classmethod
    def from_values(cls, values: Sequence[Number]) -> "SpiralCoefficients":
        return cls(tuple(Fraction(v) for v in values))

    def rho(self, order: Optional[int] = None) -> RationalSeries:
        """rho(x) = sum (-1)^n C_n x^n."""
        return RationalSeries(((-1) ** n * c for n, c in enumerate(self.C)), order)

    def strings(self) -> list[str]:
        return [str(c) for c in self.C]


def spiral_operator(rho: RationalSeries) -> RationalSeries:
    """(2 + 18 D + 36 D^2) rho with D = x d/dx."""
    d1 = rho.euler()
    d2 = d1.euler()
    return rho.scale(2) + d1.scale(18) + d2.scale(36)


def spiral_residual(rho: RationalSeries) -> RationalSeries:
    """x rho^3 L(rho) + rho - 1 at the order of ``rho``."""
    cube = rho * rho * rho
    return (cube * spiral_operator(rho)).shift(1) + rho - RationalSeries.constant(1, rho.order)


def spiral_coefficients(N: int) -> SpiralCoefficients:
    """C_0..C_N of the spiral expansion, solved order by order in exact arithmetic."""
    if N < 0:
        raise ValueError("N must be >= 0")
    a = [Fraction(1)]
    for n in range(1, N + 1):
        base = spiral_residual(RationalSeries(a + [0], n))[n]
        pivot = spiral_residual(RationalSeries(a + [1], n))[n] - base
        if pivot == 0:
            raise ZeroPivotError(f"zero pivot at order {n}")
        a.append(-base / pivot)
    return SpiralCoefficients(tuple((-1) ** n * c for n, c in enumerate(a)))


def residual_order(coeffs: SpiralCoefficients) -> Optional[int]:
    """Index of the first nonzero coefficient of the residual, computed at order N+2.

    ``None`` means the residual vanishes through the working order.
    """
    rho = coeffs.rho(coeffs.N + 2)
    return spiral_residual(rho).lowest_nonzero()


def expansion_variable(M: float, c: float, delta: float, t: float) -> float:
    return delta * delta * M**6 / c**4 * math.exp(-6.0 * delta * t)


def evaluate_approximant(coeffs: SpiralCoefficients, M: float, c: float, delta: float,
                         t: float) -> tuple[float, float]:
    """Truncated spiral radius at time t; returns (r, x)."""
    if not c > 0:
        raise ValueError("c must be > 0")
    x = expansion_variable(M, c, delta, t)
    rho = coeffs.rho()
    return M * M / c * math.exp(-2.0 * delta * t) * rho(x), x


def approximant_rate(coeffs: SpiralCoefficients, M: float, c: float, delta: float,
                     t: float) -> float:
    """Time derivative of the truncated radius: -2 delta (M^2/c) e^{-2 delta t} (rho + 3 x rho')."""
    x = expansion_variable(M, c, delta, t)
    rho = coeffs.rho()
    return -2.0 * delta * M * M / c * math.exp(-2.0 * delta * t) * (rho(x) + 3.0 * rho.euler()(x))


def term_magnitudes(coeffs: SpiralCoefficients, x: float) -> list[float]:
    return [float(c) * x**n for n, c in enumerate(coeffs.C)]


def optimal_truncation_index(coeffs: SpiralCoefficients, x: float) -> int:
    """Index of the smallest term |C_n x^n|; the classic stopping point of a divergent series."""
    mags = term_magnitudes(coeffs, x)
    return min(range(len(mags)), key=lambda n: abs(mags[n]))


def _log_fraction(q: Fraction) -> float:
    return math.log(q.numerator) - math.log(q.denominator)


@dataclass(frozen=True)
class GrowthRow:
    n: int
    C: Fraction
    ratio: Optional[Fraction]
    normalized: Optional[float]

    def as_dict(self) -> dict:
        return {
            "n": self.n,
            "C": str(self.C),
            "ratio": None if self.ratio is None else str(self.ratio),
            "ratio_float": None if self.ratio is None else float(self.ratio),
            "normalized": self.normalized,
        }


@dataclass(frozen=True)
class GrowthReport:
    rows: tuple[GrowthRow, ...]
    a: Optional[float]
    ratios_increasing: bool

    def as_dicts(self) -> list[dict]:
        return [row.as_dict() for row in self.rows]


def growth_report(coeffs: SpiralCoefficients) -> GrowthReport:
    """Tabulate C_n, successive ratios and C_n / (n! a^n) with a fitted by least squares.

    The fit is log(C_n / n!) ~ log b + n log a over n >= 1.
    """
    C = coeffs.C
    ns = [n for n in range(1, len(C)) if C[n] > 0]
    a = None
    if len(ns) >= 2:
        ys = [_log_fraction(C[n]) - math.lgamma(n + 1) for n in ns]
        nbar = sum(ns) / len(ns)
        ybar = sum(ys) / len(ys)
        slope = (sum((n - nbar) * (y - ybar) for n, y in zip(ns, ys))
                 / sum((n - nbar) ** 2 for n in ns))
        a = math.exp(slope)
    rows = []
    for n, cn in enumerate(C):
        ratio = cn / C[n - 1] if n >= 1 and C[n - 1] != 0 else None
        normalized = None
        if a is not None and cn > 0:
            normalized = math.exp(_log_fraction(cn) - math.lgamma(n + 1) - n * math.log(a))
        rows.append(GrowthRow(n=n, C=cn, ratio=ratio, normalized=normalized))
    ratios = [row.ratio for row in rows if row.ratio is not None]
    increasing = all(r2 > r1 for r1, r2 in zip(ratios, ratios[1:]))
    return GrowthReport(rows=tuple(rows), a=a, ratios_increasing=increasing)
