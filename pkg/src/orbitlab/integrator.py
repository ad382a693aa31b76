"""Adaptive integration of the Cartesian, radial and scaled-radial systems.

All formulations run through the same compiled Dormand-Prince 5(4) loop.  The
Python layer turns accepted steps into a :class:`Trajectory`: it inserts extra
samples wherever the phase would advance by more than pi/8 between stored
points, localizes collision events on the dense output and evaluates the
observables (L, E, F) for every sample.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import _kernel as K
from .dynamics import (
    CartesianState,
    DerivedConstants,
    Params,
    PolarState,
    derived_constants,
    from_polar,
)

PHASE_STEP = math.pi / 8

MODELS = ("dissipative", "conservative", "tired")
FORMULATIONS = ("cartesian", "radial", "scaled", "closed-form")


class OutOfSpanError(ValueError):
    pass


@dataclass(frozen=True)
class StepControl:
    rtol: float = 1e-10
    atol: float = 1e-12
    h_init: float = 1e-3
    h_min: float = 1e-14
    h_max: float = math.inf
    max_steps: int = 2_000_000
    # h <= cap_fraction * r^{3/2} / sqrt(c); a fraction of the local free-fall time
    cap_fraction: float = 0.01

    def __post_init__(self):
        if not 0 < self.rtol < 1:
            raise ValueError(f"rtol must lie in (0, 1), got {self.rtol!r}")
        if not self.atol > 0:
            raise ValueError(f"atol must be > 0, got {self.atol!r}")
        if not 0 < self.h_min <= self.h_init <= self.h_max:
            raise ValueError("need 0 < h_min <= h_init <= h_max")
        if self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")
        if not self.cap_fraction > 0:
            raise ValueError("cap_fraction must be > 0")


@dataclass(frozen=True)
class StopReason:
    kind: str  # TimeReached | CollisionThreshold | StepUnderflow | StepBudgetExhausted
    r_at_stop: Optional[float] = None

    @property
    def early(self) -> bool:
        return self.kind != "TimeReached"

    def as_dict(self) -> dict:
        return {"kind": self.kind, "r_at_stop": self.r_at_stop}


_STATUS = {
    K.TIME_REACHED: "TimeReached",
    K.COLLISION: "CollisionThreshold",
    K.UNDERFLOW: "StepUnderflow",
    K.BUDGET: "StepBudgetExhausted",
}


@dataclass(frozen=True)
class TrajectorySample:
    t: float
    u: tuple[float, float]
    v: tuple[float, float]
    r: float
    theta: float
    L: float
    E: float
    F: float


@dataclass(frozen=True, eq=False)
class SampleTable:
    """Column storage for samples; ``u`` and ``v`` have shape (n, 2)."""

    t: np.ndarray
    u: np.ndarray
    v: np.ndarray
    r: np.ndarray
    theta: np.ndarray
    L: np.ndarray
    E: np.ndarray
    F: np.ndarray

    def __len__(self) -> int:
        return len(self.t)

    def __getitem__(self, i: int) -> TrajectorySample:
        return TrajectorySample(
            t=float(self.t[i]),
            u=(float(self.u[i, 0]), float(self.u[i, 1])),
            v=(float(self.v[i, 0]), float(self.v[i, 1])),
            r=float(self.r[i]),
            theta=float(self.theta[i]),
            L=float(self.L[i]),
            E=float(self.E[i]),
            F=float(self.F[i]),
        )

    @property
    def rdot(self) -> np.ndarray:
        return (self.u[:, 0] * self.v[:, 0] + self.u[:, 1] * self.v[:, 1]) / self.r

    @property
    def speed2(self) -> np.ndarray:
        return self.v[:, 0] ** 2 + self.v[:, 1] ** 2


@dataclass(frozen=True, eq=False)
class DenseOutput:
    kind: int
    p: np.ndarray
    ts: np.ndarray
    ys: np.ndarray
    fs: np.ndarray


@dataclass(frozen=True, eq=False)
class Trajectory:
    params: Params
    derived: DerivedConstants
    table: SampleTable
    stop: StopReason
    formulation: str
    model: str = "dissipative"
    dense: Optional[DenseOutput] = field(default=None, repr=False)
    n_steps: int = 0
    n_rejected: int = 0

    def __len__(self) -> int:
        return len(self.table)

    def __getitem__(self, i: int) -> TrajectorySample:
        return self.table[i]

    @property
    def samples(self) -> list[TrajectorySample]:
        return [self.table[i] for i in range(len(self.table))]

    @property
    def t0(self) -> float:
        return float(self.table.t[0])

    @property
    def t_final(self) -> float:
        return float(self.table.t[-1])


def _effective_params(p: Params, model: str) -> Params:
    if model not in ("dissipative", "conservative", "tired"):
        raise ValueError(f"unknown model {model!r}")
    if model == "conservative":
        return Params(delta=0.0, c=p.c)
    if model == "tired":
        if p.alpha is None:
            raise ValueError("the tired model needs params.alpha")
        return p
    return Params(delta=p.delta, c=p.c)


def _states_from_y(kind: int, p: np.ndarray, t: np.ndarray, Y: np.ndarray):
    """Map raw solver states to (u, v, r, rdot, theta-or-None)."""
    delta = p[0]
    if kind == K.CARTESIAN:
        u = Y[:, 0:2]
        v = Y[:, 2:4]
        r = np.hypot(u[:, 0], u[:, 1])
        rdot = (u[:, 0] * v[:, 0] + u[:, 1] * v[:, 1]) / r
        return u, v, r, rdot, None
    M = p[2]
    if kind == K.RADIAL:
        r = Y[:, 0]
        rdot = Y[:, 1]
    else:
        decay = np.exp(-2.0 * delta * t)
        r = Y[:, 0] * decay
        rdot = (Y[:, 1] - 2.0 * delta * Y[:, 0]) * decay
    theta = Y[:, 2]
    thetadot = M * np.exp(-delta * t) / (r * r)
    cos, sin = np.cos(theta), np.sin(theta)
    u = np.stack([r * cos, r * sin], axis=1)
    vt = r * thetadot
    v = np.stack([rdot * cos - vt * sin, rdot * sin + vt * cos], axis=1)
    return u, v, r, rdot, theta


def _table(kind, p, params: Params, derived: DerivedConstants, t, Y, theta_ref=None) -> SampleTable:
    u, v, r, rdot, theta = _states_from_y(kind, p, t, Y)
    if theta is None:
        theta = np.arctan2(u[:, 1], u[:, 0])
        # integer winding counts, so stored and resampled phases agree bit for bit
        if theta_ref is None:
            turns = np.concatenate([[0.0], np.cumsum(-np.round(np.diff(theta) / (2.0 * np.pi)))])
        else:
            turns = np.round((theta_ref - theta) / (2.0 * np.pi))
        theta = theta + 2.0 * np.pi * turns
    L = u[:, 0] * v[:, 1] - u[:, 1] * v[:, 0]
    E = 0.5 * (v[:, 0] ** 2 + v[:, 1] ** 2) - params.c / r
    Lth2 = derived.M**2 * np.exp(-2.0 * params.delta * (t - derived.t0))
    F = 0.5 * rdot**2 - params.c / r + 0.5 * Lth2 / (r * r)
    return SampleTable(t=np.asarray(t, dtype=float).copy(), u=u.copy(), v=v.copy(), r=r,
                       theta=theta, L=L, E=E, F=F)


def _second_derivatives(kind: int, p: np.ndarray, y: np.ndarray, f: np.ndarray) -> np.ndarray:
    """Second time derivative of the position-like components (x, y) or (r-or-rho, theta)."""
    if kind == K.CARTESIAN:
        return f[:, 2:4]
    # theta' = M e^{-delta t}/r^2 (radial) or M e^{3 delta t}/rho^2 (scaled)
    rate = -p[0] if kind == K.RADIAL else 3.0 * p[0]
    thdd = f[:, 2] * (rate - 2.0 * y[:, 1] / y[:, 0])
    return np.stack([f[:, 1], thdd], axis=1)


def _quintic(kind: int, p: np.ndarray, ta, ya, fa, tb, yb, fb, times: np.ndarray) -> np.ndarray:
    """Quintic Hermite interpolation using value, rate and acceleration at both ends.

    Position-like components are O(h^6) accurate and their rates, taken as the
    derivative of the interpolant, O(h^5).  Endpoints are reproduced exactly.
    """
    h = (tb - ta)[:, None]
    s = (times - ta)[:, None] / h
    s2 = s * s
    s3 = s2 * s
    s4 = s3 * s
    s5 = s4 * s
    H0 = 1 - 10 * s3 + 15 * s4 - 6 * s5
    H1 = s - 6 * s3 + 8 * s4 - 3 * s5
    H2 = 0.5 * (s2 - 3 * s3 + 3 * s4 - s5)
    H3 = 10 * s3 - 15 * s4 + 6 * s5
    H4 = -4 * s3 + 7 * s4 - 3 * s5
    H5 = 0.5 * (s3 - 2 * s4 + s5)
    D0 = -30 * s2 + 60 * s3 - 30 * s4
    D1 = 1 - 18 * s2 + 32 * s3 - 15 * s4
    D2 = 0.5 * (2 * s - 9 * s2 + 12 * s3 - 5 * s4)
    D4 = -12 * s2 + 28 * s3 - 15 * s4
    D5 = 0.5 * (3 * s2 - 8 * s3 + 5 * s4)
    if kind == K.CARTESIAN:
        pos, vel = [0, 1], [2, 3]
    else:
        pos, vel = [0, 2], [1, None]
    qa, qb = ya[:, pos], yb[:, pos]
    va, vb = fa[:, pos], fb[:, pos]
    aa = _second_derivatives(kind, p, ya, fa)
    ab = _second_derivatives(kind, p, yb, fb)
    q = H0 * qa + H3 * qb + h * (H1 * va + H4 * vb) + h * h * (H2 * aa + H5 * ab)
    v = D0 * (qa - qb) / h + D1 * va + D4 * vb + h * (D2 * aa + D5 * ab)
    out = np.empty((len(times), ya.shape[1]))
    out[:, pos] = q
    if kind == K.CARTESIAN:
        out[:, vel] = v
    else:
        out[:, 1] = v[:, 0]
    return out


def _interp(dense: DenseOutput, times: np.ndarray) -> np.ndarray:
    ts = dense.ts
    i = np.clip(np.searchsorted(ts, times, side="right") - 1, 0, len(ts) - 2)
    return _quintic(dense.kind, dense.p, ts[i], dense.ys[i], dense.fs[i],
                    ts[i + 1], dense.ys[i + 1], dense.fs[i + 1], times)


def _phase_increments(kind, p, ts, ys) -> np.ndarray:
    """Conservative estimate of |delta theta| across each accepted step."""
    if kind != K.CARTESIAN:
        return np.abs(np.diff(ys[:, 2]))
    x, y, vx, vy = ys[:, 0], ys[:, 1], ys[:, 2], ys[:, 3]
    w = np.abs(x * vy - y * vx) / (x * x + y * y)
    return np.diff(ts) * np.maximum(w[:-1], w[1:])


def _localize_collision(kind, p, ts, ys, fs, r_min):
    """Bisect the last step's dense output for r = r_min; returns (t*, y*, f*)."""
    a, b = float(ts[-2]), float(ts[-1])
    y0, f0, y1, f1 = ys[-2], fs[-2], ys[-1], fs[-1]
    t_hit, y_hit = b, y1
    for _ in range(200):
        m = 0.5 * (a + b)
        if m <= a or m >= b:
            break
        ym = _quintic(kind, p, ts[-2:-1], y0[None], f0[None], ts[-1:], y1[None], f1[None],
                      np.array([m]))[0]
        rm = K.radius(kind, m, ym, p)
        if rm > r_min:
            a = m
        else:
            b = m
            t_hit, y_hit = m, ym
        if abs(rm - r_min) <= 1e-9 * r_min:
            t_hit, y_hit = m, ym
            break
    return t_hit, y_hit, K.rhs(kind, t_hit, y_hit, p)


def _run(kind: int, p: np.ndarray, params: Params, derived: DerivedConstants, y0: np.ndarray,
         t0: float, t_end: float, ctl: StepControl, r_min: float, formulation: str,
         model: str) -> Trajectory:
    if not t_end > t0:
        raise ValueError(f"t_end must exceed the start time {t0}, got {t_end}")
    if not r_min > 0:
        raise ValueError(f"r_min must be > 0, got {r_min}")
    r_start = K.radius(kind, t0, y0, p)
    if not r_start > r_min:
        raise ValueError(f"initial radius {r_start} must exceed r_min {r_min}")
    ts, ys, fs, status, n_rej = K.dopri5(
        kind, p, float(t0), y0, float(t_end), ctl.rtol, ctl.atol, ctl.h_init, ctl.h_min,
        ctl.h_max, int(ctl.max_steps), ctl.cap_fraction, float(r_min))
    n_steps = len(ts) - 1 + n_rej
    stop = StopReason(_STATUS[status])
    if status == K.COLLISION and len(ts) >= 2:
        t_hit, y_hit, f_hit = _localize_collision(kind, p, ts, ys, fs, r_min)
        ts = ts.copy()
        ts[-1] = t_hit
        ys[-1] = y_hit
        fs[-1] = f_hit
        stop = StopReason("CollisionThreshold", float(K.radius(kind, t_hit, y_hit, p)))
    elif status != K.TIME_REACHED:
        stop = StopReason(stop.kind, float(K.radius(kind, ts[-1], ys[-1], p)))
    dense = DenseOutput(kind=kind, p=p, ts=ts, ys=ys, fs=fs)

    # extra samples so that consecutive stored phases differ by less than pi/8
    dphi = _phase_increments(kind, p, ts, ys)
    n_fill = np.floor(dphi / PHASE_STEP).astype(np.int64)
    if n_fill.sum() > 0:
        steps = np.repeat(np.arange(len(n_fill)), n_fill)
        j = np.concatenate([np.arange(1, k + 1) for k in n_fill if k > 0])
        frac = j / (np.repeat(n_fill, n_fill) + 1.0)
        t_fill = ts[steps] + frac * (ts[steps + 1] - ts[steps])
        y_fill = _interp(dense, t_fill)
        t_all = np.concatenate([ts, t_fill])
        y_all = np.concatenate([ys, y_fill])
        order = np.argsort(t_all, kind="stable")
        t_s, y_s = t_all[order], y_all[order]
    else:
        t_s, y_s = ts, ys
    table = _table(kind, p, params, derived, t_s, y_s)
    return Trajectory(params=params, derived=derived, table=table, stop=stop,
                      formulation=formulation, model=model, dense=dense,
                      n_steps=n_steps, n_rejected=n_rej)


def default_r_min(r0: float) -> float:
    return 1e-9 * r0


def integrate_cartesian(s0: CartesianState, p: Params, ctl: StepControl = StepControl(),
                        t_end: float = 20.0, r_min: Optional[float] = None,
                        model: str = "dissipative") -> Trajectory:
    """Integrate the planar equation of motion from ``s0`` up to ``t_end``."""
    pe = _effective_params(p, model)
    r0 = math.hypot(*s0.u)
    if r_min is None:
        r_min = default_r_min(r0)
    derived = derived_constants(s0, pe)
    parr = np.array([pe.delta, pe.c, pe.alpha or 0.0])
    y0 = np.array([s0.u[0], s0.u[1], s0.v[0], s0.v[1]], dtype=float)
    return _run(K.CARTESIAN, parr, pe, derived, y0, s0.t, t_end, ctl, r_min, "cartesian", model)


def _radial_start(r0, rdot0, p: Params, M, t0, theta0) -> CartesianState:
    L0 = M * math.exp(-p.delta * t0)
    return from_polar(PolarState(t=t0, r=r0, rdot=rdot0, theta=theta0, thetadot=L0 / (r0 * r0)))


def integrate_radial(r0: float, rdot0: float, p: Params, M: float,
                     ctl: StepControl = StepControl(), t_end: float = 20.0,
                     r_min: Optional[float] = None, t0: float = 0.0, theta0: float = 0.0,
                     model: str = "dissipative") -> Trajectory:
    """Integrate the reduced radial equation; the phase is carried by quadrature of L/r^2.

    ``M`` is the momentum constant in L(t) = M e^{-delta t} with t absolute, so a
    run started at ``t0`` has L(t0) = M e^{-delta t0}.
    """
    if model == "tired":
        raise ValueError("the radial reduction is only available for the dissipative and "
                         "conservative models")
    pe = _effective_params(p, model)
    if r_min is None:
        r_min = default_r_min(r0)
    derived = derived_constants(_radial_start(r0, rdot0, pe, M, t0, theta0), pe)
    parr = np.array([pe.delta, pe.c, float(M)])
    y0 = np.array([r0, rdot0, theta0], dtype=float)
    return _run(K.RADIAL, parr, pe, derived, y0, t0, t_end, ctl, r_min, "radial", model)


def integrate_scaled_radial(rho0: float, rhodot0: float, p: Params, M: float,
                            ctl: StepControl = StepControl(), t_end: float = 20.0,
                            r_min: Optional[float] = None, t0: float = 0.0,
                            theta0: float = 0.0, model: str = "dissipative") -> Trajectory:
    """Integrate the radial equation for rho = r e^{2 delta t}.

    Substituting r = rho e^{-2 delta t} gives
    rho'' = 3 delta rho' - 2 delta^2 rho + e^{6 delta t} (M^2/rho^3 - c/rho^2).
    """
    if model == "tired":
        raise ValueError("the scaled radial reduction is only available for the dissipative "
                         "and conservative models")
    pe = _effective_params(p, model)
    decay = math.exp(-2.0 * pe.delta * t0)
    r0 = rho0 * decay
    rdot0 = (rhodot0 - 2.0 * pe.delta * rho0) * decay
    if r_min is None:
        r_min = default_r_min(r0)
    derived = derived_constants(_radial_start(r0, rdot0, pe, M, t0, theta0), pe)
    parr = np.array([pe.delta, pe.c, float(M)])
    y0 = np.array([rho0, rhodot0, theta0], dtype=float)
    return _run(K.SCALED, parr, pe, derived, y0, t0, t_end, ctl, r_min, "scaled", model)


def scaled_initial(r0: float, rdot0: float, delta: float, t0: float = 0.0) -> tuple[float, float]:
    """(rho, rho') matching (r, r') at time t0."""
    g = math.exp(2.0 * delta * t0)
    return r0 * g, (rdot0 + 2.0 * delta * r0) * g


def resample_table(traj: Trajectory, times: Sequence[float]) -> SampleTable:
    """Dense-output samples at ``times`` (quintic Hermite on the accepted steps)."""
    if traj.dense is None:
        raise ValueError("trajectory carries no dense output")
    times = np.asarray(times, dtype=float)
    t_lo, t_hi = traj.dense.ts[0], traj.dense.ts[-1]
    if times.size and (times.min() < t_lo or times.max() > t_hi):
        raise OutOfSpanError(f"requested times outside [{t_lo}, {t_hi}]")
    Y = _interp(traj.dense, times)
    ref = None
    if traj.dense.kind == K.CARTESIAN:
        k = np.clip(np.searchsorted(traj.table.t, times, side="right") - 1, 0, len(traj.table) - 1)
        ref = traj.table.theta[k]
    return _table(traj.dense.kind, traj.dense.p, traj.params, traj.derived, times, Y, theta_ref=ref)


def resample_dense(traj: Trajectory, times: Sequence[float]) -> list[TrajectorySample]:
    table = resample_table(traj, times)
    return [table[i] for i in range(len(table))]


def trajectory_from_states(params: Params, t: np.ndarray, u: np.ndarray, v: np.ndarray,
                           formulation: str, model: str = "dissipative") -> Trajectory:
    """Wrap externally computed states (e.g. closed-form samples) as a Trajectory."""
    t = np.asarray(t, dtype=float)
    s0 = CartesianState(t=float(t[0]), u=(float(u[0, 0]), float(u[0, 1])),
                        v=(float(v[0, 0]), float(v[0, 1])))
    derived = derived_constants(s0, params)
    Y = np.concatenate([u, v], axis=1)
    p = np.array([params.delta, params.c, params.alpha or 0.0])
    table = _table(K.CARTESIAN, p, params, derived, t, Y)
    return Trajectory(params=params, derived=derived, table=table,
                      stop=StopReason("TimeReached"), formulation=formulation, model=model)
