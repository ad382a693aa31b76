"""Command-line entry point: ``orbitlab {simulate,verify,series,closed-form,sweep}``.

Exit codes: 0 success, 1 check failure, 2 usage or configuration error,
3 integration terminated early.
"""

from __future__ import annotations

import argparse
import logging
import sys
from typing import Optional, Sequence

import numpy as np

from . import output
from .closed_form import FAMILIES, TiredSpiralSpec, evaluate, tired_residual, \
    track_closed_form
from .config import ConfigError, ScenarioConfig, load
from .dynamics import Params
from .integrator import StepControl, Trajectory, integrate_cartesian, integrate_radial, \
    integrate_scaled_radial, scaled_initial
from .monitors import SuiteConfig, reports_to_json, run_suite
from .series import growth_report, residual_order, spiral_coefficients
from .sweep import SWEEP_COLUMNS, SweepGrid, default_workers, run_sweep

EXIT_OK, EXIT_CHECK, EXIT_USAGE, EXIT_EARLY = 0, 1, 2, 3
REFERENCE_VALUES = {1: 2, 2: 124}

log = logging.getLogger("orbitlab")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _scenario_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="YAML/JSON scenario file; flags override its values")
    p.add_argument("--model", choices=("dissipative", "conservative", "tired"))
    p.add_argument("--formulation", choices=("cartesian", "radial", "scaled"))
    p.add_argument("--delta", type=float)
    p.add_argument("--c", type=float)
    p.add_argument("--alpha", type=float)
    p.add_argument("--u0", metavar="X,Y")
    p.add_argument("--v0", metavar="X,Y")
    p.add_argument("--r0", type=float)
    p.add_argument("--rdot0", type=float)
    p.add_argument("--momentum", type=float)
    p.add_argument("--t-end", dest="t_end", type=float)
    p.add_argument("--rtol", type=float)
    p.add_argument("--atol", type=float)
    p.add_argument("--r-min", dest="r_min", type=float)
    p.add_argument("--max-steps", dest="max_steps", type=int)
    p.add_argument("--out", help="primary output file")
    p.add_argument("--report", help="JSON report file")
    p.add_argument("--plot", help="SVG plot file")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="orbitlab", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", parents=[common], help="integrate one scenario, write CSV/JSON/SVG")
    _scenario_flags(p)

    p = sub.add_parser("verify", parents=[common], help="integrate and run the trajectory checks")
    _scenario_flags(p)
    p.add_argument("--tol", type=float, help="override every check tolerance")
    p.add_argument("--suite", choices=("theorems", "all"),
                   help="'all' adds the liminf diagnostic")

    p = sub.add_parser("series", parents=[common], help="exact spiral-series coefficients")
    p.add_argument("--order", type=int, default=12)
    p.add_argument("--out")

    p = sub.add_parser("closed-form", parents=[common], help="sample a tired-model spiral")
    p.add_argument("--family", choices=FAMILIES, default="fast")
    p.add_argument("--amplitude", type=float, default=1.0)
    p.add_argument("--phase", type=float, default=0.0)
    p.add_argument("--sign", type=int, choices=(1, -1), default=1)
    p.add_argument("--delta", type=float, default=0.1)
    p.add_argument("--c", type=float, default=1.0)
    p.add_argument("--t-end", dest="t_end", type=float, default=20.0)
    p.add_argument("--samples", type=int, default=1001)
    p.add_argument("--track", action="store_true", help="also integrate and report deviation")
    p.add_argument("--rtol", type=float, default=1e-10)
    p.add_argument("--out", help="CSV of t,re_u,im_u,r")
    p.add_argument("--report", help="residual summary JSON")

    p = sub.add_parser("sweep", parents=[common], help="grid of initial data; one CSV row per point")
    p.add_argument("--config", help="file whose 'sweep' mapping defines the grid")
    p.add_argument("--workers", type=int)
    p.add_argument("--rtol", type=float)
    p.add_argument("--atol", type=float)
    p.add_argument("--t-end", dest="t_end", type=float)
    p.add_argument("--out", help="summary CSV")
    return parser


def _overrides(args: argparse.Namespace) -> dict:
    keys = ("model", "formulation", "delta", "c", "alpha", "u0", "v0", "r0", "rdot0",
            "momentum", "t_end", "rtol", "atol", "r_min", "max_steps", "out", "report", "plot",
            "tol", "suite")
    return {k: getattr(args, k) for k in keys if getattr(args, k, None) is not None}


def simulate(cfg: ScenarioConfig) -> Trajectory:
    p, ctl = cfg.params(), cfg.step_control()
    if cfg.formulation == "cartesian":
        return integrate_cartesian(cfg.cartesian_state(), p, ctl, cfg.t_end, cfg.r_min, cfg.model)
    r0, rdot0, M = cfg.radial_data()
    if cfg.formulation == "radial":
        return integrate_radial(r0, rdot0, p, M, ctl, cfg.t_end, cfg.r_min, model=cfg.model)
    delta = 0.0 if cfg.model == "conservative" else cfg.delta
    rho0, rhodot0 = scaled_initial(r0, rdot0, delta)
    return integrate_scaled_radial(rho0, rhodot0, p, M, ctl, cfg.t_end, cfg.r_min,
                                   model=cfg.model)


def cmd_simulate(cfg: ScenarioConfig) -> int:
    traj = simulate(cfg)
    if cfg.out:
        output.write_trajectory_csv(traj, cfg.out)
    summary = {"config": cfg.as_dict(), **output.trajectory_summary(traj)}
    if cfg.report:
        output.write_json(summary, cfg.report)
    if cfg.plot:
        output.write_svg(traj, cfg.plot)
    if not cfg.out and not cfg.report:
        sys.stdout.write(output.dumps(summary))
    log.info("stop=%s t_final=%r samples=%d", traj.stop.kind, traj.t_final, len(traj))
    return EXIT_EARLY if traj.stop.early else EXIT_OK


def cmd_verify(cfg: ScenarioConfig) -> int:
    traj = simulate(cfg)
    diag = cfg.suite == "all"
    suite = (SuiteConfig(include_diagnostics=diag) if cfg.tol is None
             else SuiteConfig.uniform_tolerance(cfg.tol, include_diagnostics=diag))
    reports = run_suite(traj, traj.derived, suite)
    text = reports_to_json(reports)
    target = cfg.report or cfg.out
    if target:
        with open(target, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    if cfg.plot:
        output.write_svg(traj, cfg.plot)
    for r in reports:
        log.info("%-20s applicable=%s pass=%s margin=%s", r.check, r.applicable, r.passed,
                 r.worst_margin)
    if any(r.hard_failure for r in reports):
        return EXIT_CHECK
    return EXIT_EARLY if traj.stop.early else EXIT_OK


def series_document(N: int) -> dict:
    coeffs = spiral_coefficients(N)
    growth = growth_report(coeffs) if N >= 1 else None
    matches = all(coeffs.C[n] == v for n, v in REFERENCE_VALUES.items() if n <= N)
    return {
        "N": N,
        "C": coeffs.strings(),
        "residual_order": residual_order(coeffs),
        "growth": growth.as_dicts() if growth else [],
        "growth_fit_a": growth.a if growth else None,
        "ratios_increasing": growth.ratios_increasing if growth else None,
        "matches_reference": matches,
        "reference_values": {str(n): str(v) for n, v in REFERENCE_VALUES.items()},
    }


def cmd_series(N: int, out: Optional[str]) -> int:
    if N < 0:
        raise ConfigError("order", f"must be >= 0, got {N}")
    doc = series_document(N)
    if out:
        output.write_json(doc, out)
    else:
        sys.stdout.write(output.dumps(doc))
    if not doc["matches_reference"]:
        log.warning("exact recursion disagrees with the reference values 2 and 124: C=%s",
                    doc["C"][:3])
    return EXIT_OK


def cmd_closed_form(args: argparse.Namespace) -> int:
    alpha = args.delta if args.family == "fast" else 1.5 * args.delta
    try:
        spec = TiredSpiralSpec(args.family, args.amplitude,
                               Params(delta=args.delta, c=args.c, alpha=alpha),
                               args.phase, args.sign)
    except ValueError as exc:
        raise ConfigError("closed-form", str(exc)) from None
    if args.samples < 2:
        raise ConfigError("samples", "must be >= 2")
    if not args.t_end > 0:
        raise ConfigError("t_end", "must be > 0")
    times = np.linspace(0.0, args.t_end, args.samples)
    rows, residuals = [], []
    for t in times.tolist():
        u = evaluate(spec, t)[0]
        rows.append((t, u.real, u.imag, abs(u)))
        residuals.append(tired_residual(spec, t))
    if args.out:
        output.write_rows(args.out, ("t", "re_u", "im_u", "r"), rows)
    summary = {
        "family": spec.family, "amplitude": spec.amplitude, "phase": spec.phase,
        "sign": spec.sign, "delta": args.delta, "c": args.c, "alpha": alpha,
        "t_end": args.t_end, "n_samples": args.samples,
        "max_scaled_residual": max(residuals),
    }
    code = EXIT_OK
    if args.track:
        dev, traj = track_closed_form(spec, args.t_end, StepControl(rtol=args.rtol))
        summary.update(tracking_deviation=dev, stop=traj.stop.as_dict())
        if traj.stop.early:
            code = EXIT_EARLY
    if args.report:
        output.write_json(summary, args.report)
    elif not args.out:
        sys.stdout.write(output.dumps(summary))
    return code


def cmd_sweep(args: argparse.Namespace) -> int:
    data = {}
    if args.config:
        cfg = load(args.config)
        data = dict(cfg.sweep or {})
        ctl = cfg.step_control()
    else:
        ctl = StepControl()
    if args.t_end is not None:
        data["t_end"] = args.t_end
    grid = SweepGrid.from_mapping(data)
    if args.rtol is not None or args.atol is not None:
        try:
            ctl = StepControl(rtol=args.rtol or ctl.rtol, atol=args.atol or ctl.atol)
        except ValueError as exc:
            raise ConfigError("rtol", str(exc)) from None
    workers = args.workers if args.workers is not None else default_workers()
    if workers < 1:
        raise ConfigError("workers", "must be >= 1")
    rows = run_sweep(grid, ctl, workers)
    lines = [[row[k] for k in SWEEP_COLUMNS] for row in rows]
    if args.out:
        output.write_rows(args.out, SWEEP_COLUMNS, lines)
    else:
        sys.stdout.write(",".join(SWEEP_COLUMNS) + "\n")
        for line in lines:
            sys.stdout.write(",".join(repr(x) if isinstance(x, float) else str(x)
                                      for x in line) + "\n")
    return EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command in ("simulate", "verify"):
            cfg = load(args.config, _overrides(args))
            return cmd_simulate(cfg) if args.command == "simulate" else cmd_verify(cfg)
        if args.command == "series":
            return cmd_series(args.order, args.out)
        if args.command == "closed-form":
            return cmd_closed_form(args)
        return cmd_sweep(args)
    except ConfigError as exc:
        print(f"orbitlab: config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as exc:
        print(f"orbitlab: invalid input: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
