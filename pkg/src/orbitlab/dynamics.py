"""State types, vector fields and scalar observables for the damped central-force problem.

Positions and velocities live in the plane and are carried as ``(x, y)``
tuples; internally they are treated as complex numbers ``x + iy``.  The three
model equations share one parameter record:

* dissipative   u'' + delta*u' + c*u/|u|^3 = 0
* conservative  the same with delta = 0
* tired         u'' + delta*u' + c*exp(-alpha*t)*u/|u|^3 = 0
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

Vec2 = tuple[float, float]


class SingularStateError(ValueError):
    """Raised when a quantity is requested at the singular centre u = 0."""


@dataclass(frozen=True)
class Params:
    delta: float
    c: float
    alpha: Optional[float] = None

    def __post_init__(self):
        if not (math.isfinite(self.c) and self.c > 0):
            raise ValueError(f"c must be a finite positive number, got {self.c!r}")
        if not (math.isfinite(self.delta) and self.delta >= 0):
            raise ValueError(f"delta must be finite and >= 0, got {self.delta!r}")
        if self.alpha is not None and not (math.isfinite(self.alpha) and self.alpha >= 0):
            raise ValueError(f"alpha must be finite and >= 0, got {self.alpha!r}")


@dataclass(frozen=True)
class CartesianState:
    t: float
    u: Vec2
    v: Vec2

    @property
    def uc(self) -> complex:
        return complex(*self.u)

    @property
    def vc(self) -> complex:
        return complex(*self.v)


@dataclass(frozen=True)
class PolarState:
    t: float
    r: float
    rdot: float
    theta: float
    thetadot: float


@dataclass(frozen=True)
class DerivedConstants:
    """Constants fixed by the initial data.

    ``K``, ``eta``, ``C_bound`` and ``D_bound`` are ``None`` when ``M == 0``
    (or so small that ``M**4`` underflows);
    ``radius_bound`` is ``None`` unless the smallness condition holds.
    """

    M: float
    F0: float
    E0: float
    small_ok: bool
    radius_bound: Optional[float] = None
    K: Optional[float] = None
    eta: Optional[float] = None
    C_bound: Optional[float] = None
    D_bound: Optional[float] = None
    t0: float = 0.0

    def as_dict(self) -> dict:
        return {
            "M": self.M,
            "F0": self.F0,
            "E0": self.E0,
            "small_ok": self.small_ok,
            "radius_bound": self.radius_bound,
            "K": self.K,
            "eta": self.eta,
            "C_bound": self.C_bound,
            "D_bound": self.D_bound,
            "t0": self.t0,
        }


def _check_radius(r: float, what: str = "|u|") -> None:
    if not r > 0:
        raise SingularStateError(f"{what} must be > 0 (singular centre), got {r!r}")


def accel_dissipative(state: CartesianState, p: Params) -> Vec2:
    u, v = state.uc, state.vc
    r = abs(u)
    _check_radius(r)
    a = -p.delta * v - p.c * u / (r * r * r)
    return (a.real, a.imag)


def accel_conservative(state: CartesianState, p: Params) -> Vec2:
    u = state.uc
    r = abs(u)
    _check_radius(r)
    a = -p.c * u / (r * r * r)
    return (a.real, a.imag)


def accel_tired(state: CartesianState, p: Params) -> Vec2:
    if p.alpha is None:
        raise ValueError("the tired model needs params.alpha")
    u, v = state.uc, state.vc
    r = abs(u)
    _check_radius(r)
    a = -p.delta * v - p.c * math.exp(-p.alpha * state.t) * u / (r * r * r)
    return (a.real, a.imag)


def radial_rhs(t: float, r: float, rdot: float, p: Params, M: float) -> float:
    """Radial acceleration r'' once the phase has been eliminated via L = M e^{-delta t}."""
    _check_radius(r, "r")
    return M * M * math.exp(-2.0 * p.delta * t) / r**3 - p.c / (r * r) - p.delta * rdot


def to_polar(s: CartesianState, prev_theta: Optional[float] = None) -> PolarState:
    u, v = s.uc, s.vc
    r = abs(u)
    _check_radius(r)
    w = u.conjugate() * v
    theta = math.atan2(u.imag, u.real)
    if prev_theta is not None:
        theta += 2.0 * math.pi * round((prev_theta - theta) / (2.0 * math.pi))
    return PolarState(t=s.t, r=r, rdot=w.real / r, theta=theta, thetadot=w.imag / (r * r))


def from_polar(s: PolarState) -> CartesianState:
    _check_radius(s.r, "r")
    e = complex(math.cos(s.theta), math.sin(s.theta))
    u = s.r * e
    v = complex(s.rdot, s.r * s.thetadot) * e
    return CartesianState(t=s.t, u=(u.real, u.imag), v=(v.real, v.imag))


def angular_momentum(s: CartesianState) -> float:
    """L = Im(conj(u) v) = r^2 theta'."""
    (x, y), (vx, vy) = s.u, s.v
    return x * vy - y * vx


def energy(s: CartesianState, p: Params) -> float:
    r = math.hypot(*s.u)
    _check_radius(r)
    return 0.5 * (s.v[0] ** 2 + s.v[1] ** 2) - p.c / r


def f_function(t: float, r: float, rdot: float, p: Params, M: float) -> float:
    """Radial Lyapunov function; strictly decreasing along solutions when delta > 0 and M != 0."""
    _check_radius(r, "r")
    return 0.5 * rdot * rdot - p.c / r + 0.5 * M * M * math.exp(-2.0 * p.delta * t) / (r * r)


def derived_constants(s0: CartesianState, p: Params) -> DerivedConstants:
    """Momentum, initial energies and the growth-bound constants for initial data ``s0``.

    Time is measured from ``s0.t``: the bounds hold for ``tau = t - s0.t`` and
    ``M`` is the angular momentum at ``s0``.
    """
    c = p.c
    ps = to_polar(s0)
    M = angular_momentum(s0)
    F0 = f_function(0.0, ps.r, ps.rdot, p, M)
    E0 = energy(s0, p)
    v2 = s0.v[0] ** 2 + s0.v[1] ** 2
    small_ok = ps.r * v2 < 2.0 * c
    # r0 / (1 - r0 v0^2 / 2c): algebraically 2c r0 / (2c - r0 v0^2), never rounds below r0
    radius_bound = ps.r / (1.0 - ps.r * v2 / (2.0 * c)) if small_ok else None
    M2 = M * M
    # tiny |M| underflows M^4; the constants are then not representable, treat as M = 0
    if M2 * M2 == 0.0 or not math.isfinite(c * c / (M2 * M2)):
        return DerivedConstants(M=M, F0=F0, E0=E0, small_ok=small_ok,
                                radius_bound=radius_bound, t0=s0.t)
    K = c / M2 + math.sqrt(max(2.0 * F0, 0.0) / M2 + c * c / (M2 * M2))
    eta = 1.0 / K
    # max(2F0, 0) keeps r'^2 <= 2F0 + (c/M)^2 e^{2 delta t} <= C^2 e^{2 delta t} valid when F0 < 0
    C_bound = math.sqrt(max(2.0 * F0, 0.0) + c * c / M2)
    D_bound = C_bound + abs(M) / eta
    return DerivedConstants(M=M, F0=F0, E0=E0, small_ok=small_ok, radius_bound=radius_bound,
                            K=K, eta=eta, C_bound=C_bound, D_bound=D_bound, t0=s0.t)


def time_dependent_majorant(t: float, derived: DerivedConstants, p: Params) -> Optional[float]:
    """Tighter bound on e^{-delta t}/r(t): c/M^2 e^{delta t} + sqrt(2F0/M^2 + c^2/M^4 e^{2 delta t})."""
    M = derived.M
    if derived.K is None:
        return None
    M2 = M * M
    e = math.exp(p.delta * t)
    inner = 2.0 * derived.F0 / M2 + p.c * p.c / (M2 * M2) * e * e
    return p.c / M2 * e + math.sqrt(max(inner, 0.0))
