"""Trajectory checks for the momentum law, dissipation identities and growth bounds.

Every check returns a :class:`CheckReport`.  Checks that need data the
trajectory cannot supply (M = 0, no smallness condition, early stop) come back
with ``applicable=False`` instead of failing.  Statements about t -> infinity
are evaluated as finite-horizon proxies and flagged ``proxy=True``.

Time in every bound is measured from the trajectory's first sample.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .dynamics import DerivedConstants, time_dependent_majorant
from .integrator import Trajectory, resample_table

ROUNDOFF_SLACK = 1e-9
FD_POINTS = 4096


@dataclass(frozen=True)
class CheckReport:
    check: str
    passed: bool
    applicable: bool = True
    proxy: bool = False
    worst_margin: Optional[float] = None
    at_time: Optional[float] = None
    tolerance: Optional[float] = None
    notes: str = ""

    def as_dict(self) -> dict:
        return {
            "check": self.check,
            "pass": self.passed,
            "applicable": self.applicable,
            "proxy": self.proxy,
            "worst_margin": _finite_or_none(self.worst_margin),
            "at_time": _finite_or_none(self.at_time),
            "tolerance": _finite_or_none(self.tolerance),
            "notes": self.notes,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CheckReport":
        return cls(check=d["check"], passed=d["pass"], applicable=d["applicable"],
                   proxy=d["proxy"], worst_margin=d["worst_margin"], at_time=d["at_time"],
                   tolerance=d["tolerance"], notes=d["notes"])

    @property
    def hard_failure(self) -> bool:
        return self.applicable and not self.proxy and not self.passed


def _finite_or_none(x):
    if x is None:
        return None
    x = float(x)
    return x if math.isfinite(x) else None


def _inapplicable(name: str, why: str, proxy: bool = False) -> CheckReport:
    return CheckReport(check=name, passed=True, applicable=False, proxy=proxy,
                       notes=f"inapplicable: {why}")


def reports_to_json(reports: list[CheckReport]) -> str:
    return json.dumps([r.as_dict() for r in reports], indent=2) + "\n"


def reports_from_json(text: str) -> list[CheckReport]:
    return [CheckReport.from_dict(d) for d in json.loads(text)]


def _tau(traj: Trajectory) -> np.ndarray:
    return traj.table.t - traj.derived.t0


def check_momentum_law(traj: Trajectory, tol: float = 1e-6) -> CheckReport:
    """max |L(t) - M e^{-delta t}| over the stored samples."""
    name = "momentum_law"
    d = traj.derived
    if d.M == 0.0:
        return _inapplicable(name, "M = 0, the decay law is trivially 0 = 0")
    T = traj.table
    gap = np.abs(T.L - d.M * np.exp(-traj.params.delta * _tau(traj)))
    i = int(np.argmax(gap))
    return CheckReport(name, bool(gap[i] <= tol), worst_margin=float(gap[i]),
                       at_time=float(T.t[i]), tolerance=tol,
                       notes=f"max |L - M exp(-delta t)| over {len(T)} samples")


def _uniform(traj: Trajectory, n: int):
    times = np.linspace(traj.t0, traj.t_final, n)
    return times, resample_table(traj, times)


def check_energy_dissipation(traj: Trajectory, tol: float = 1e-4,
                             n_points: int = FD_POINTS) -> CheckReport:
    """Centred differences of E on a uniform grid against -delta |v|^2, plus monotone E.

    The discrepancy is normalised by max(1, max delta |v|^2).  When delta = 0
    the monotonicity requirement becomes |E - E(0)| <= tol * max(1, |E(0)|).
    """
    name = "energy_dissipation"
    T = traj.table
    if len(T) < 3:
        return _inapplicable(name, "fewer than 3 samples")
    delta = traj.params.delta
    notes = []
    if traj.dense is not None:
        times, R = _uniform(traj, n_points)
        h = times[1] - times[0]
        fd = (R.E[2:] - R.E[:-2]) / (2.0 * h)
        exact = -delta * R.speed2[1:-1]
        scale = max(1.0, float(np.max(np.abs(exact))))
        gap = np.abs(fd - exact) / scale
        i = int(np.argmax(gap))
        worst, at = float(gap[i]), float(times[i + 1])
        notes.append(f"centred FD on {n_points} uniform points, h={h:.6g}, scale={scale:.6g}")
    else:
        # no dense output: differences on the stored (possibly uneven) samples
        t, E = T.t, T.E
        fd = (E[2:] - E[:-2]) / (t[2:] - t[:-2])
        exact = -delta * T.speed2[1:-1]
        scale = max(1.0, float(np.max(np.abs(exact))))
        gap = np.abs(fd - exact) / scale
        i = int(np.argmax(gap))
        worst, at = float(gap[i]), float(t[i + 1])
        notes.append("centred FD on stored samples")
    if delta > 0:
        rises = np.diff(T.E)
        slack = ROUNDOFF_SLACK * max(1.0, float(np.max(np.abs(T.E))))
        monotone = bool(np.all(rises <= slack))
        notes.append(f"E non-increasing: {monotone} (largest rise {float(np.max(rises)):.3g})")
    else:
        drift = float(np.max(np.abs(T.E - T.E[0])))
        monotone = drift <= tol * max(1.0, abs(float(T.E[0])))
        notes.append(f"delta = 0: max |E - E0| = {drift:.3g}")
    return CheckReport(name, bool(worst <= tol and monotone), worst_margin=worst, at_time=at,
                       tolerance=tol, notes="; ".join(notes))


def energy_balance_residual(traj: Trajectory) -> float:
    """max_k |E(t_k) - E(t_0) + delta int_0^{t_k} |v|^2| / max(1, |E|), trapezoid on samples.

    Integral form of the dissipation identity; insensitive to fast orbital
    oscillations that a coarse pointwise difference cannot resolve.
    """
    T = traj.table
    v2 = T.speed2
    cum = np.concatenate([[0.0], np.cumsum(0.5 * (v2[1:] + v2[:-1]) * np.diff(T.t))])
    gap = np.abs(T.E - T.E[0] + traj.params.delta * cum)
    return float(np.max(gap) / max(1.0, float(np.max(np.abs(T.E)))))


def f_rate_discrepancy(traj: Trajectory, n_points: int = FD_POINTS) -> float:
    """Centred-difference dF/dt against -delta (r'^2 + M^2 e^{-2 delta t}/r^2), relative."""
    times, R = _uniform(traj, n_points)
    h = times[1] - times[0]
    d = traj.derived
    delta = traj.params.delta
    tau = times - d.t0
    fd = (R.F[2:] - R.F[:-2]) / (2.0 * h)
    exact = -delta * (R.rdot**2 + d.M**2 * np.exp(-2.0 * delta * tau) / R.r**2)[1:-1]
    return float(np.max(np.abs(fd - exact)) / max(1e-300, float(np.max(np.abs(exact)))))


def check_f_monotone(traj: Trajectory, tol: Optional[float] = None) -> CheckReport:
    """F strictly decreasing between samples and never above F(0).

    ``tol`` is the absolute slack allowed for round-off; by default
    1e-9 * max(1, max |F|).  With delta = 0, F must stay within tol of F(0).
    """
    name = "f_monotone"
    d = traj.derived
    if d.M == 0.0:
        return _inapplicable(name, "M = 0")
    T = traj.table
    F = T.F
    if tol is None:
        tol = ROUNDOFF_SLACK * max(1.0, float(np.max(np.abs(F))))
    if traj.params.delta == 0:
        gap = np.abs(F - F[0])
        i = int(np.argmax(gap))
        return CheckReport(name, bool(gap[i] <= tol), worst_margin=float(gap[i]),
                           at_time=float(T.t[i]), tolerance=tol,
                           notes="delta = 0: F conserved, max |F - F0|")
    rises = np.diff(F)
    above = F[1:] - F[0]
    i = int(np.argmax(rises))
    j = int(np.argmax(above))
    worst = max(float(rises[i]), float(above[j]))
    at = float(T.t[i + 1]) if rises[i] >= above[j] else float(T.t[j + 1])
    return CheckReport(name, bool(worst <= tol), worst_margin=worst, at_time=at, tolerance=tol,
                       notes="largest increase of F between samples or above F(0)")


def check_growth_bounds(traj: Trajectory, derived: Optional[DerivedConstants] = None,
                        slack: float = ROUNDOFF_SLACK) -> CheckReport:
    """|r'| <= C e^{delta t}, r >= eta e^{-2 delta t}, |u'| <= D e^{delta t} at every sample.

    The margin is the smallest relative slack (bound - value)/bound across the
    three inequalities; the check passes when it is >= -slack.
    """
    name = "growth_bounds"
    d = derived or traj.derived
    if d.M == 0.0 or d.eta is None:
        return _inapplicable(name, "M = 0, bound constants undefined")
    T = traj.table
    delta = traj.params.delta
    tau = _tau(traj)
    grow = np.exp(delta * tau)
    speed = np.sqrt(T.speed2)
    lower = d.eta / (grow * grow)
    m_rdot = 1.0 - np.abs(T.rdot) / (d.C_bound * grow)
    m_r = T.r / lower - 1.0
    m_v = 1.0 - speed / (d.D_bound * grow)
    margins = {"rdot": m_rdot, "r": m_r, "speed": m_v}
    worst_key = min(margins, key=lambda k: float(np.min(margins[k])))
    arr = margins[worst_key]
    i = int(np.argmin(arr))
    worst = float(arr[i])
    # time-dependent majorant e^{-delta t}/r <= c/M^2 e^{delta t} + sqrt(...)
    maj = np.array([time_dependent_majorant(t, d, traj.params) for t in tau])
    m_td = float(np.min(maj * grow * T.r - 1.0))
    notes = (f"C={d.C_bound:.6g} eta={d.eta:.6g} D={d.D_bound:.6g}; "
             f"min margins rdot={float(np.min(m_rdot)):.4g} r={float(np.min(m_r)):.4g} "
             f"speed={float(np.min(m_v)):.4g} (worst: {worst_key}); "
             f"time-dependent majorant margin={m_td:.4g}")
    return CheckReport(name, bool(worst >= -slack), worst_margin=worst, at_time=float(T.t[i]),
                       tolerance=slack, notes=notes)


def check_boundedness(traj: Trajectory, derived: Optional[DerivedConstants] = None,
                      slack: float = ROUNDOFF_SLACK) -> CheckReport:
    """max |u| <= 2c|u0| / (2c - |u0||u0'|^2) under the smallness condition.

    Margin is radius_bound - max r; passes when >= -slack * radius_bound.
    """
    name = "boundedness"
    d = derived or traj.derived
    if not d.small_ok:
        return _inapplicable(name, "smallness condition |u0||u0'|^2 < 2c does not hold")
    T = traj.table
    i = int(np.argmax(T.r))
    margin = d.radius_bound - float(T.r[i])
    return CheckReport(name, bool(margin >= -slack * d.radius_bound), worst_margin=margin,
                       at_time=float(T.t[i]), tolerance=slack,
                       notes=f"radius_bound={d.radius_bound!r}, max r={float(T.r[i])!r} over "
                             f"[{traj.t0}, {traj.t_final}]")


def check_convergence(traj: Trajectory, window_fraction: float = 0.1,
                      shrink_factor: float = 0.5) -> CheckReport:
    """Finite-horizon proxy for |u| -> 0: tail-window max r <= shrink * head-window max r.

    The margin is the ratio tail max / head max; tolerance is ``shrink_factor``.
    """
    name = "convergence"
    if traj.stop.early:
        return _inapplicable(name, f"integration stopped early ({traj.stop.kind} at "
                                   f"t={traj.t_final!r})", proxy=True)
    T = traj.table
    if not np.all(np.isfinite(T.r)):
        return _inapplicable(name, "non-finite radius", proxy=True)
    t0, t1 = traj.t0, traj.t_final
    w = window_fraction * (t1 - t0)
    head = T.t <= t0 + w
    tail = T.t >= t1 - w
    head_max = float(np.max(T.r[head]))
    tail_idx = np.flatnonzero(tail)
    k = tail_idx[int(np.argmax(T.r[tail]))]
    tail_max = float(T.r[k])
    ratio = tail_max / head_max
    return CheckReport(name, bool(ratio <= shrink_factor), proxy=True, worst_margin=ratio,
                       at_time=float(T.t[k]), tolerance=shrink_factor,
                       notes=f"head max r={head_max!r}, tail max r={tail_max!r}, "
                             f"window={window_fraction}")


def liminf_diagnostic(traj: Trajectory, derived: Optional[DerivedConstants] = None,
                      tail_fraction: float = 0.1) -> CheckReport:
    """Tail minimum of r e^{2 delta t} against the floor M^2/(2c); informational only."""
    name = "liminf_diagnostic"
    d = derived or traj.derived
    if d.M == 0.0:
        return _inapplicable(name, "M = 0", proxy=True)
    T = traj.table
    floor = d.M**2 / (2.0 * traj.params.c)
    t0, t1 = traj.t0, traj.t_final
    tail = np.flatnonzero(T.t >= t1 - tail_fraction * (t1 - t0))
    scaled = T.r[tail] * np.exp(2.0 * traj.params.delta * (T.t[tail] - d.t0))
    k = int(np.argmin(scaled))
    m = float(scaled[k])
    return CheckReport(name, bool(m >= floor), proxy=True, worst_margin=m,
                       at_time=float(T.t[tail[k]]), tolerance=floor,
                       notes=f"tail min of r exp(2 delta t) = {m!r}; floor M^2/(2c) = {floor!r}; "
                             f"M^2/c = {2 * floor!r}; a finite tail cannot certify a liminf")


@dataclass(frozen=True)
class SuiteConfig:
    momentum_tol: float = 1e-6
    energy_tol: float = 1e-4
    f_tol: Optional[float] = None
    bound_slack: float = ROUNDOFF_SLACK
    window_fraction: float = 0.1
    shrink_factor: float = 0.5
    tail_fraction: float = 0.1
    fd_points: int = FD_POINTS
    include_diagnostics: bool = False

    @classmethod
    def uniform_tolerance(cls, tol: float, **kw) -> "SuiteConfig":
        """Every hard check at the same tolerance (slack for inequalities)."""
        return cls(momentum_tol=tol, energy_tol=tol, f_tol=tol, bound_slack=tol, **kw)


def run_suite(traj: Trajectory, derived: Optional[DerivedConstants] = None,
              config: SuiteConfig = SuiteConfig()) -> list[CheckReport]:
    d = derived or traj.derived
    reports = [
        check_momentum_law(traj, config.momentum_tol),
        check_energy_dissipation(traj, config.energy_tol, config.fd_points),
        check_f_monotone(traj, config.f_tol),
        check_growth_bounds(traj, d, config.bound_slack),
        check_boundedness(traj, d, config.bound_slack),
        check_convergence(traj, config.window_fraction, config.shrink_factor),
    ]
    if config.include_diagnostics:
        reports.append(liminf_diagnostic(traj, d, config.tail_fraction))
    return reports
