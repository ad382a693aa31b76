import copy
import dataclasses
import json
import math

import numpy as np
import pytest

from orbitlab.closed_form import fast_spec, sample_trajectory
from orbitlab.dynamics import CartesianState, Params
from orbitlab.integrator import StepControl, integrate_cartesian, integrate_radial
from orbitlab.monitors import (CheckReport, SuiteConfig, check_boundedness, check_convergence,
                               check_energy_dissipation, check_f_monotone, check_growth_bounds,
                               check_momentum_law, energy_balance_residual, f_rate_discrepancy,
                               liminf_diagnostic, reports_from_json, reports_to_json, run_suite)
from orbitlab.series import approximant_rate, evaluate_approximant, spiral_coefficients

SCHEMA = ["check", "pass", "applicable", "proxy", "worst_margin", "at_time", "tolerance", "notes"]


def with_column(traj, **cols):
    return dataclasses.replace(traj, table=dataclasses.replace(traj.table, **cols))


@pytest.fixture(scope="module")
def short_spiral(unit_start):
    return integrate_cartesian(unit_start, Params(0.1, 1.0), t_end=5.0)


@pytest.fixture(scope="module")
def ellipse_run():
    s0 = CartesianState(0.0, (1.0, 0.0), (0.0, 1.2))
    return integrate_cartesian(s0, Params(0.0, 1.0), t_end=30.0)


@pytest.fixture(scope="module")
def infall_run():
    s0 = CartesianState(0.0, (1.0, 0.0), (-0.2, 0.0))
    return integrate_cartesian(s0, Params(0.1, 1.0), t_end=0.5)


# ---- momentum law ------------------------------------------------------------------

def test_momentum_conservative_circle(circle_run):
    rep = check_momentum_law(circle_run)
    assert rep.passed and rep.worst_margin <= 1e-9


def test_momentum_reference_run(spiral_run):
    rep = check_momentum_law(spiral_run, tol=1e-7)
    assert rep.passed and rep.applicable and not rep.proxy
    assert rep.tolerance == 1e-7


def test_momentum_negative_control(spiral_run):
    bad = with_column(spiral_run, L=spiral_run.table.L * 1.01)
    rep = check_momentum_law(bad, tol=1e-7)
    assert not rep.passed and rep.hard_failure
    assert rep.worst_margin == pytest.approx(0.01, rel=1e-3)


# ---- energy dissipation ------------------------------------------------------------

def test_energy_conservative(circle_run):
    rep = check_energy_dissipation(circle_run)
    assert rep.passed and rep.worst_margin <= 1e-8


def test_energy_fine_grid(short_spiral):
    rep = check_energy_dissipation(short_spiral, tol=1e-5, n_points=5001)  # h = 1e-3
    assert rep.passed, rep.notes
    assert np.all(np.diff(short_spiral.table.E) <= 0)


def test_energy_negative_controls(short_spiral):
    T = short_spiral.table
    bumped = with_column(short_spiral, E=T.E + 1e-3 * (T.t > 2.5))
    rep = check_energy_dissipation(bumped, tol=1e-5)
    assert not rep.passed
    assert "E non-increasing: False" in rep.notes
    # wrong damping rate: the identity itself is violated
    wrong = dataclasses.replace(short_spiral, params=Params(0.2, 1.0))
    rep = check_energy_dissipation(wrong, tol=1e-5)
    assert not rep.passed and rep.worst_margin > 1e-2


def test_energy_balance_integral_form(spiral_run):
    assert energy_balance_residual(spiral_run) <= 1e-5


# ---- Lyapunov function -------------------------------------------------------------

def test_f_monotone_dissipative(spiral_run, short_spiral):
    for tr in (spiral_run, short_spiral):
        rep = check_f_monotone(tr)
        assert rep.passed and rep.worst_margin < 0


def test_f_constant_without_damping(circle_run, ellipse_run):
    for tr in (circle_run, ellipse_run):
        rep = check_f_monotone(tr, tol=1e-8)
        assert rep.passed
        assert "delta = 0" in rep.notes


def test_f_rate_by_finite_differences(short_spiral):
    assert f_rate_discrepancy(short_spiral) <= 1e-4


def test_f_negative_control(short_spiral):
    T = short_spiral.table
    F = T.F.copy()
    F[len(F) // 2] += 1e-3
    rep = check_f_monotone(with_column(short_spiral, F=F))
    assert not rep.passed


def test_f_zero_momentum_inapplicable(infall_run):
    rep = check_f_monotone(infall_run)
    assert not rep.applicable and rep.passed and not rep.hard_failure


# ---- growth bounds -----------------------------------------------------------------

def test_growth_bounds_reference(spiral_run):
    rep = check_growth_bounds(spiral_run)
    assert rep.passed and rep.worst_margin > 0
    assert "time-dependent majorant" in rep.notes


def test_growth_bounds_initial_time(unit_start):
    tr = integrate_cartesian(unit_start, Params(0.1, 1.0), t_end=1e-3)
    d = tr.derived
    assert math.hypot(*unit_start.v) <= d.D_bound
    assert math.hypot(*unit_start.u) >= d.eta
    assert check_growth_bounds(tr).passed


def test_growth_bounds_negative_control(spiral_run):
    d = spiral_run.derived
    rep = check_growth_bounds(spiral_run, dataclasses.replace(d, eta=2 * d.eta))
    assert not rep.passed and "worst: r" in rep.notes


def test_growth_bounds_radial_run():
    tr = integrate_radial(1.0, 0.0, Params(0.05, 1.0), 1.0, t_end=40.0)
    assert check_growth_bounds(tr).passed


def test_growth_bounds_zero_momentum(infall_run):
    rep = check_growth_bounds(infall_run)
    assert not rep.applicable and not rep.hard_failure


# ---- boundedness -------------------------------------------------------------------

def test_boundedness_reference(spiral_run):
    rep = check_boundedness(spiral_run)
    assert rep.passed and spiral_run.derived.radius_bound == 2.0
    assert rep.worst_margin == pytest.approx(1.0, abs=1e-9)


def test_boundedness_conservative_ellipse(ellipse_run):
    d = ellipse_run.derived
    assert d.small_ok
    rep = check_boundedness(ellipse_run)
    assert rep.passed
    # apocentre 2a - 1 with a = c / (2|E|)
    apo = 1 / (2 * 0.28) * 2 - 1
    assert apo * (1 - 1e-5) <= np.max(ellipse_run.table.r) <= apo * (1 + 1e-9)


def test_boundedness_boundary_inapplicable():
    s0 = CartesianState(0.0, (1.0, 0.0), (0.0, math.sqrt(2.0)))
    tr = integrate_cartesian(s0, Params(0.1, 1.0), t_end=1.0)
    rep = check_boundedness(tr)
    assert not rep.applicable and rep.passed


def test_boundedness_negative_control(spiral_run):
    d = dataclasses.replace(spiral_run.derived, radius_bound=0.9)
    assert not check_boundedness(spiral_run, d).passed


# ---- convergence proxy and liminf --------------------------------------------------

def test_convergence_strong_damping(unit_start):
    tr = integrate_cartesian(unit_start, Params(0.2, 1.0), t_end=15.0)
    rep = check_convergence(tr)
    assert rep.passed and rep.proxy
    assert rep.worst_margin < 0.5


def test_convergence_fails_on_circle(circle_run):
    rep = check_convergence(circle_run)
    assert not rep.passed and rep.proxy
    assert not rep.hard_failure
    assert rep.worst_margin == pytest.approx(1.0, abs=1e-8)


def test_convergence_closed_form():
    tr = sample_trajectory(fast_spec(1.0, 0.1, 1.0), np.linspace(0, 60, 20001))
    rep = check_convergence(tr)
    assert rep.passed
    assert rep.worst_margin == pytest.approx(math.exp(-0.1 * 54), rel=1e-9)


def test_convergence_inapplicable_after_early_stop():
    s0 = CartesianState(0.0, (1.0, 0.0), (0.0, 0.0))
    tr = integrate_cartesian(s0, Params(0.1, 1.0), t_end=5.0, r_min=1e-6)
    rep = check_convergence(tr)
    assert not rep.applicable and rep.proxy


def test_liminf_series_seeded():
    delta, M, c, t0 = 0.1, 1.0, 1.0, 4.0
    co = spiral_coefficients(2)
    r0, _ = evaluate_approximant(co, M, c, delta, t0)
    tr = integrate_radial(r0, approximant_rate(co, M, c, delta, t0), Params(delta, c), M,
                          t_end=t0 + 10.0, t0=t0)
    rep = liminf_diagnostic(tr)
    # the clock restarts at t0, where the momentum constant is L(t0) = M e^{-delta t0}
    L0 = tr.derived.M
    assert L0 == pytest.approx(M * math.exp(-delta * t0), rel=1e-12)
    assert rep.worst_margin == pytest.approx(L0**2 / c, rel=1e-2)
    assert rep.tolerance == pytest.approx(L0**2 / (2 * c), rel=1e-12)
    assert rep.proxy and rep.passed
    assert "floor M^2/(2c)" in rep.notes


def test_liminf_circle(circle_run):
    rep = liminf_diagnostic(circle_run)
    assert rep.passed
    assert rep.tolerance == 0.5
    assert rep.worst_margin == pytest.approx(1.0, abs=1e-9)


# ---- suite and serialisation -------------------------------------------------------

def test_suite_counts(spiral_run):
    reps = run_suite(spiral_run)
    assert [r.check for r in reps] == ["momentum_law", "energy_dissipation", "f_monotone",
                                       "growth_bounds", "boundedness", "convergence"]
    assert all(r.applicable for r in reps)
    with_diag = run_suite(spiral_run, config=SuiteConfig(include_diagnostics=True))
    assert len(with_diag) == 7 and with_diag[-1].check == "liminf_diagnostic"


def test_suite_zero_momentum(infall_run):
    reps = {r.check: r for r in run_suite(infall_run)}
    assert not reps["growth_bounds"].applicable
    assert not reps["momentum_law"].applicable


def test_json_round_trip(spiral_run, infall_run):
    reps = run_suite(spiral_run, config=SuiteConfig(include_diagnostics=True))
    reps += run_suite(infall_run)
    text = reports_to_json(reps)
    assert reports_from_json(text) == reps
    for d in json.loads(text):
        assert list(d) == SCHEMA


def test_non_finite_margin_serialises_as_null():
    rep = CheckReport("x", False, worst_margin=math.inf)
    assert json.loads(reports_to_json([rep]))[0]["worst_margin"] is None


def test_checks_are_pure(short_spiral):
    before = copy.deepcopy(short_spiral.table)
    a = run_suite(short_spiral, config=SuiteConfig(include_diagnostics=True))
    b = run_suite(short_spiral, config=SuiteConfig(include_diagnostics=True))
    assert a == b
    for col in ("t", "u", "v", "r", "theta", "L", "E", "F"):
        assert np.array_equal(getattr(before, col), getattr(short_spiral.table, col))


def test_margins_shrink_under_refinement():
    s0 = CartesianState(0.0, (1.0, 0.0), (0.0, 1.2))
    margins = []
    for tol in (1e-8, 1e-10):
        ctl = StepControl(rtol=tol, atol=tol, cap_fraction=10.0)
        tr = integrate_cartesian(s0, Params(0.0, 1.0), ctl, t_end=20.0)
        margins.append((check_f_monotone(tr).worst_margin,
                        check_energy_dissipation(tr).worst_margin))
    (f1, e1), (f2, e2) = margins
    assert f2 < f1 / 10
    assert e2 < e1 / 10
