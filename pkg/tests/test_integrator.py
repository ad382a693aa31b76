import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from orbitlab.dynamics import CartesianState, Params
from orbitlab.integrator import (OutOfSpanError, StepControl, integrate_cartesian,
                                 integrate_radial, integrate_scaled_radial, resample_dense,
                                 resample_table, scaled_initial)
from orbitlab.series import approximant_rate, evaluate_approximant, spiral_coefficients


def test_step_control_validation():
    for kw in (dict(rtol=0), dict(rtol=1), dict(atol=0), dict(h_min=1.0, h_init=0.1),
               dict(h_init=1.0, h_max=0.5), dict(max_steps=0), dict(cap_fraction=0)):
        with pytest.raises(ValueError):
            StepControl(**kw)


def test_bad_run_arguments(unit_start):
    p = Params(0.1, 1.0)
    with pytest.raises(ValueError):
        integrate_cartesian(unit_start, p, t_end=0.0)
    with pytest.raises(ValueError):
        integrate_cartesian(unit_start, p, t_end=1.0, r_min=2.0)
    with pytest.raises(ValueError):
        integrate_cartesian(unit_start, p, t_end=1.0, model="relativistic")
    with pytest.raises(ValueError):
        integrate_cartesian(unit_start, p, t_end=1.0, model="tired")  # alpha missing
    with pytest.raises(ValueError):
        integrate_radial(1.0, 0.0, Params(0.1, 1.0, alpha=0.1), 1.0, t_end=1.0, model="tired")


# ---- reference orbits --------------------------------------------------------------

def test_circle_closes(circle_run):
    assert circle_run.stop.kind == "TimeReached"
    assert circle_run.t_final == 2 * math.pi
    u_end = circle_run.table.u[-1]
    assert math.hypot(u_end[0] - 1.0, u_end[1]) <= 1e-6
    assert circle_run.table.theta[-1] == pytest.approx(2 * math.pi, abs=1e-6)


def test_circle_energy_constant(circle_run):
    E = circle_run.table.E
    assert np.max(np.abs(E - E[0])) <= 1e-10


def test_momentum_law_reference_run(spiral_run):
    T = spiral_run.table
    assert spiral_run.stop.kind == "TimeReached"
    assert np.max(np.abs(T.L - np.exp(-0.1 * T.t))) <= 1e-8


def test_trajectory_invariants(spiral_run):
    T = spiral_run.table
    assert np.all(np.diff(T.t) > 0)
    assert T.t[0] == 0.0 and tuple(T.u[0]) == (1.0, 0.0) and tuple(T.v[0]) == (0.0, 1.0)
    assert np.max(np.abs(np.diff(T.theta))) < math.pi / 8 + 1e-9
    assert np.allclose(T.r, np.hypot(T.u[:, 0], T.u[:, 1]), rtol=1e-15, atol=0)
    s = spiral_run[5]
    assert s.r == T.r[5] and s.L == T.L[5]
    assert len(spiral_run.samples) == len(spiral_run)


def test_zero_momentum_infall_collides(unit_start):
    s0 = CartesianState(0.0, (1.0, 0.0), (0.0, 0.0))
    tr = integrate_cartesian(s0, Params(0.1, 1.0), t_end=20.0, r_min=1e-6)
    assert tr.stop.kind == "CollisionThreshold"
    assert tr.stop.early
    assert 1e-6 * (1 - 1e-6) <= tr.stop.r_at_stop <= 1e-6
    assert tr.table.r[-1] == pytest.approx(tr.stop.r_at_stop, rel=1e-12)
    assert tr.t_final < 20.0


@pytest.mark.parametrize("r_min", [1e-3, 1e-5])
def test_event_localisation_is_tight(r_min):
    s0 = CartesianState(0.0, (0.0, 2.0), (0.0, 0.3))
    tr = integrate_cartesian(s0, Params(0.3, 1.5), t_end=50.0, r_min=r_min)
    assert tr.stop.kind == "CollisionThreshold"
    assert r_min * (1 - 1e-6) <= tr.stop.r_at_stop <= r_min * (1 + 1e-6)


def test_step_underflow():
    s0 = CartesianState(0.0, (1.0, 0.0), (0.0, 1.0))
    ctl = StepControl(h_min=0.5, h_init=0.5, h_max=0.5)
    tr = integrate_cartesian(s0, Params(0.1, 1.0), ctl, t_end=5.0)
    assert tr.stop.kind == "StepUnderflow"
    assert tr.stop.early


def test_step_budget_exhausted(unit_start):
    tr = integrate_cartesian(unit_start, Params(0.1, 1.0), StepControl(max_steps=50), t_end=5.0)
    assert tr.stop.kind == "StepBudgetExhausted"
    assert tr.n_steps <= 50
    assert 0 < tr.t_final < 5.0


def test_determinism(unit_start):
    p = Params(0.1, 1.0)
    a = integrate_cartesian(unit_start, p, t_end=6.0)
    b = integrate_cartesian(unit_start, p, t_end=6.0)
    for col in ("t", "u", "v", "r", "theta", "L", "E", "F"):
        assert np.array_equal(getattr(a.table, col), getattr(b.table, col))
    assert a.stop == b.stop


# ---- radial and scaled formulations -------------------------------------------------

def test_radial_circular_equilibrium():
    tr = integrate_radial(1.0, 0.0, Params(0.0, 2.0), math.sqrt(2.0), t_end=100.0)
    assert tr.stop.kind == "TimeReached"
    assert np.max(np.abs(tr.table.r - 1.0)) <= 1e-9


def _common_grid(t_end=10.0, n=2001):
    return np.linspace(0.0, t_end, n)


def test_radial_matches_cartesian(unit_start):
    p = Params(0.1, 1.0)
    cart = integrate_cartesian(unit_start, p, t_end=10.0)
    rad = integrate_radial(1.0, 0.0, p, 1.0, t_end=10.0)
    times = _common_grid()
    rc, rr = resample_table(cart, times).r, resample_table(rad, times).r
    assert np.max(np.abs(rc - rr) / rc) <= 1e-7
    thc, thr = resample_table(cart, times).theta, resample_table(rad, times).theta
    assert np.max(np.abs(thc - thr)) <= 1e-6


def test_scaled_matches_radial():
    p = Params(0.1, 1.0)
    rad = integrate_radial(1.0, 0.0, p, 1.0, t_end=10.0)
    rho0, rhodot0 = scaled_initial(1.0, 0.0, 0.1)
    sc = integrate_scaled_radial(rho0, rhodot0, p, 1.0, t_end=10.0)
    times = _common_grid()
    rr, rs = resample_table(rad, times).r, resample_table(sc, times).r
    assert np.max(np.abs(rr - rs) / rr) <= 1e-7


def test_scaled_without_damping_is_radial():
    p = Params(0.0, 1.0)
    rad = integrate_radial(1.3, 0.2, p, 0.9, t_end=10.0)
    sc = integrate_scaled_radial(1.3, 0.2, p, 0.9, t_end=10.0)
    assert np.array_equal(rad.table.t, sc.table.t)
    assert np.array_equal(rad.table.r, sc.table.r)


def test_radial_lower_bound():
    p = Params(0.05, 1.0)
    tr = integrate_radial(1.0, 0.0, p, 1.0, t_end=40.0)
    assert tr.stop.kind == "TimeReached"
    eta = tr.derived.eta
    assert np.all(tr.table.r >= eta * np.exp(-2 * 0.05 * tr.table.t))


def test_scaled_series_seeded_stays_order_one():
    # seeded on the spiral asymptotics, rho should stay near M^2/c
    delta, M, c, t0 = 0.1, 1.0, 1.0, 4.0
    co = spiral_coefficients(2)
    r0, x0 = evaluate_approximant(co, M, c, delta, t0)
    rd0 = approximant_rate(co, M, c, delta, t0)
    assert x0 <= 1e-3
    rho0, rhodot0 = scaled_initial(r0, rd0, delta, t0)
    tr = integrate_scaled_radial(rho0, rhodot0, Params(delta, c), M, t_end=t0 + 16.0, t0=t0)
    assert tr.stop.kind == "TimeReached"
    rho = tr.table.r * np.exp(2 * delta * tr.table.t)
    assert np.all((rho > 0.99) & (rho < 1.01))


def _series_gap(t0, delta=0.1, M=1.0, c=1.0):
    co = spiral_coefficients(2)
    r0, x0 = evaluate_approximant(co, M, c, delta, t0)
    rd0 = approximant_rate(co, M, c, delta, t0)
    tr = integrate_radial(r0, rd0, Params(delta, c), M, t_end=t0 + 1 / delta, t0=t0)
    rs = np.array([evaluate_approximant(co, M, c, delta, t)[0] for t in tr.table.t])
    return float(np.max(np.abs(tr.table.r - rs) / tr.table.r)), x0


def test_series_seeded_radial_gap_scales_cubically():
    C3 = float(spiral_coefficients(3).C[3])
    gap_a, xa = _series_gap(4.0)
    gap_b, xb = _series_gap(6.0)
    assert gap_a <= 2 * C3 * xa**3
    assert gap_b <= 2 * C3 * xb**3
    # the gap follows x^3, not a lower power
    assert gap_b / gap_a <= 2 * (xb / xa) ** 3


# ---- dense output ------------------------------------------------------------------

def test_resample_endpoints_exact(spiral_run):
    T = spiral_run.table
    R = resample_table(spiral_run, [T.t[0], T.t[-1]])
    for col in ("u", "v", "r", "L", "E", "F"):
        assert np.array_equal(getattr(R, col)[0], getattr(T, col)[0])
        assert np.array_equal(getattr(R, col)[1], getattr(T, col)[-1])
    assert R.theta[1] == T.theta[-1]


def test_resample_circle_midpoints(circle_run):
    ts = circle_run.dense.ts
    mids = 0.5 * (ts[1:] + ts[:-1])
    R = resample_table(circle_run, mids)
    assert np.max(np.abs(R.r - 1.0)) <= 1e-6
    assert np.max(np.abs(R.theta - mids)) <= 1e-6


def test_resample_momentum(spiral_run):
    times = np.linspace(0.0, 20.0, 5001)
    samples = resample_dense(spiral_run, times)
    assert len(samples) == len(times)
    assert max(abs(s.L - math.exp(-0.1 * s.t)) for s in samples) <= 1e-6
    theta = np.array([s.theta for s in samples])
    ref = resample_table(spiral_run, times).theta
    assert np.array_equal(theta, ref)


def test_resample_out_of_span(spiral_run):
    with pytest.raises(OutOfSpanError):
        resample_table(spiral_run, [-0.1, 1.0])
    with pytest.raises(OutOfSpanError):
        resample_dense(spiral_run, [20.5])


# ---- accuracy ----------------------------------------------------------------------

def _circle_error(tol):
    s0 = CartesianState(0.0, (1.0, 0.0), (0.0, 1.0))
    ctl = StepControl(rtol=tol, atol=tol, cap_fraction=10.0)
    tr = integrate_cartesian(s0, Params(0.0, 1.0), ctl, t_end=2 * math.pi)
    u = tr.table.u[-1]
    return math.hypot(u[0] - 1.0, u[1]), tr.n_steps


def test_convergence_order_on_circle():
    errs, steps = zip(*(_circle_error(tol) for tol in (1e-6, 1e-7, 1e-8)))
    assert errs[0] > errs[1] > errs[2]
    slope = -np.polyfit(np.log(steps), np.log(errs), 1)[0]
    assert slope >= 4.0


@settings(max_examples=12, deadline=None)
@given(r0=st.floats(0.5, 2.0), vr=st.floats(-0.5, 0.5), vt=st.floats(0.3, 1.2),
       delta=st.floats(0.0, 0.5))
def test_momentum_law_property(r0, vr, vt, delta):
    ctl = StepControl(rtol=1e-10, atol=1e-12)
    s0 = CartesianState(0.0, (r0, 0.0), (vr, vt))
    tr = integrate_cartesian(s0, Params(delta, 1.0), ctl, t_end=5.0)
    M = tr.derived.M
    err = np.max(np.abs(tr.table.L - M * np.exp(-delta * tr.table.t)))
    assert err <= 100 * (ctl.rtol * abs(M) + ctl.atol)
