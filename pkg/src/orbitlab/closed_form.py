"""Exact spiralling solutions of the tired-charge model and fixtures built on them.

Two families solve u'' + delta u' + c e^{-alpha t} u/|u|^3 = 0:

* fast (alpha = delta):
      u(t) = U e^{-delta t} exp(i (s w e^{delta t} + phi)),  w = sqrt(c) / (delta U^{3/2})
* uniform (alpha = 3 delta / 2):
      u(t) = V e^{-delta t/2} exp(i (s Omega t + phi)),    Omega = sqrt(c/V^3 - delta^2/4)

For the uniform family the angular speed carries a *minus* sign under the root;
with a plus sign the equation is left with a residual -delta^2/2 * u.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

from .dynamics import CartesianState, Params
from .integrator import StepControl, Trajectory, integrate_cartesian, resample_table, \
    trajectory_from_states

FAMILIES = ("fast", "uniform")


@dataclass(frozen=True)
class TiredSpiralSpec:
    family: str
    amplitude: float
    params: Params
    phase: float = 0.0
    sign: int = 1

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"family must be one of {FAMILIES}, got {self.family!r}")
        if not self.amplitude > 0:
            raise ValueError("amplitude must be > 0")
        if self.sign not in (1, -1):
            raise ValueError("sign must be +1 or -1")
        p = self.params
        if p.alpha is None:
            raise ValueError("params.alpha is required")
        want = p.delta if self.family == "fast" else 1.5 * p.delta
        if not math.isclose(p.alpha, want, rel_tol=1e-15, abs_tol=0.0):
            raise ValueError(f"{self.family} family needs alpha = {want}, got {p.alpha}")
        if self.family == "fast" and p.delta == 0:
            raise ValueError("the fast family needs delta > 0")
        if self.family == "uniform" and p.c / self.amplitude**3 <= p.delta**2 / 4:
            raise ValueError("uniform family needs c/V^3 > delta^2/4")


def fast_spec(U: float, delta: float, c: float, phase: float = 0.0, sign: int = 1) -> TiredSpiralSpec:
    return TiredSpiralSpec("fast", U, Params(delta=delta, c=c, alpha=delta), phase, sign)


def uniform_spec(V: float, delta: float, c: float, phase: float = 0.0, sign: int = 1) -> TiredSpiralSpec:
    return TiredSpiralSpec("uniform", V, Params(delta=delta, c=c, alpha=1.5 * delta), phase, sign)


def uniform_angular_speed(V: float, c: float, delta: float) -> float:
    return math.sqrt(c / V**3 - delta * delta / 4.0)


def eval_fast_spiral(spec: TiredSpiralSpec, t: float) -> tuple[complex, complex, complex]:
    """(u, u', u'') of the fast family at time t, as complex numbers."""
    if spec.family != "fast":
        raise ValueError("spec is not a fast-family spiral")
    d, c, U, s = spec.params.delta, spec.params.c, spec.amplitude, spec.sign
    w = math.sqrt(c) / (d * U**1.5)
    g = math.exp(d * t)
    psi = s * w * g + spec.phase
    dpsi = s * w * d * g
    u = U / g * cmath.exp(1j * psi)
    q = complex(-d, dpsi)
    # psi'' = delta psi'
    return u, u * q, u * (q * q + 1j * d * dpsi)


def eval_uniform_spiral(spec: TiredSpiralSpec, t: float) -> tuple[complex, complex, complex]:
    if spec.family != "uniform":
        raise ValueError("spec is not a uniform-family spiral")
    d, c, V, s = spec.params.delta, spec.params.c, spec.amplitude, spec.sign
    omega = uniform_angular_speed(V, c, d)
    u = V * math.exp(-0.5 * d * t) * cmath.exp(1j * (s * omega * t + spec.phase))
    q = complex(-0.5 * d, s * omega)
    return u, u * q, u * q * q


def evaluate(spec: TiredSpiralSpec, t: float) -> tuple[complex, complex, complex]:
    if spec.family == "fast":
        return eval_fast_spiral(spec, t)
    return eval_uniform_spiral(spec, t)


def tired_residual(spec: TiredSpiralSpec, t: float) -> float:
    """|u'' + delta u' + c e^{-alpha t} u/|u|^3| scaled by max(|u''|, c e^{-alpha t}/|u|^2)."""
    p = spec.params
    u, du, ddu = evaluate(spec, t)
    r = abs(u)
    pull = p.c * math.exp(-p.alpha * t)
    res = ddu + p.delta * du + pull * u / r**3
    return abs(res) / max(abs(ddu), pull / r**2)


def initial_state(spec: TiredSpiralSpec, t0: float = 0.0) -> CartesianState:
    u, du, _ = evaluate(spec, t0)
    return CartesianState(t=t0, u=(u.real, u.imag), v=(du.real, du.imag))


def sample_trajectory(spec: TiredSpiralSpec, times) -> Trajectory:
    """Closed-form states at ``times`` wrapped as a Trajectory (no dense output)."""
    times = np.asarray(times, dtype=float)
    vals = [evaluate(spec, t) for t in times]
    u = np.array([[z.real, z.imag] for z, _, _ in vals])
    v = np.array([[z.real, z.imag] for _, z, _ in vals])
    return trajectory_from_states(spec.params, times, u, v, formulation="closed-form",
                                  model="tired")


def track_closed_form(spec: TiredSpiralSpec, t_end: float,
                      ctl: StepControl = StepControl()) -> tuple[float, Trajectory]:
    """Max of |u_num - u_exact| / |u_exact| over the stored samples of a tired-model run.

    The run starts from the exact (u(0), u'(0)); its trajectory is returned alongside.
    """
    traj = integrate_cartesian(initial_state(spec), spec.params, ctl, t_end=t_end, model="tired")
    table = traj.table
    exact = np.array([evaluate(spec, t)[0] for t in table.t])
    num = table.u[:, 0] + 1j * table.u[:, 1]
    dev = float(np.max(np.abs(num - exact) / np.abs(exact)))
    return dev, traj


def tracking_deviation_dense(traj: Trajectory, spec: TiredSpiralSpec, n: int = 2001) -> float:
    """Same deviation measured on a uniform grid through the dense output."""
    times = np.linspace(traj.t0, traj.t_final, n)
    table = resample_table(traj, times)
    exact = np.array([evaluate(spec, t)[0] for t in times])
    num = table.u[:, 0] + 1j * table.u[:, 1]
    return float(np.max(np.abs(num - exact) / np.abs(exact)))
