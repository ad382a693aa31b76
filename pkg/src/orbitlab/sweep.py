"""Grid sweeps over initial data, fanned out to a process pool in deterministic order."""

from __future__ import annotations

import itertools
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .config import ConfigError
from .dynamics import CartesianState, Params
from .integrator import StepControl, integrate_cartesian
from .monitors import check_boundedness, check_f_monotone, check_growth_bounds, \
    check_momentum_law

SWEEP_COLUMNS = (
    "index", "u0_abs", "v0_abs", "angle", "delta", "M", "F0", "E0", "small_ok",
    "radius_bound", "stop", "t_final", "final_r", "max_r", "bound_ok", "bounded_observed",
    "momentum_pass", "f_monotone_pass", "growth_pass", "error",
)


@dataclass(frozen=True)
class SweepGrid:
    u0_abs: tuple[float, ...] = tuple(np.linspace(0.5, 2.0, 10).tolist())
    v0_abs: tuple[float, ...] = tuple(np.linspace(0.1, 1.9, 10).tolist())
    angle: tuple[float, ...] = (math.pi / 3,)
    delta: tuple[float, ...] = (0.1,)
    c: float = 1.0
    t_end: float = 10.0
    escape_factor: float = 100.0

    def points(self) -> list[tuple[float, float, float, float]]:
        return list(itertools.product(self.u0_abs, self.v0_abs, self.angle, self.delta))

    @classmethod
    def from_mapping(cls, data: Optional[dict]) -> "SweepGrid":
        if not data:
            return cls()
        kw = {}
        for key, value in data.items():
            name = str(key).replace("-", "_")
            if name in ("u0_abs", "v0_abs", "angle", "delta"):
                try:
                    if isinstance(value, dict):
                        vals = np.linspace(float(value["start"]), float(value["stop"]),
                                           int(value["num"])).tolist()
                    elif isinstance(value, (list, tuple)):
                        vals = [float(v) for v in value]
                    else:
                        vals = [float(value)]
                except (KeyError, TypeError, ValueError) as exc:
                    raise ConfigError(f"sweep.{key}", f"cannot parse {value!r}: {exc}") from None
                if not vals:
                    raise ConfigError(f"sweep.{key}", "empty list")
                kw[name] = tuple(vals)
            elif name in ("c", "t_end", "escape_factor"):
                try:
                    kw[name] = float(value)
                except (TypeError, ValueError):
                    raise ConfigError(f"sweep.{key}", f"cannot parse {value!r}") from None
            else:
                raise ConfigError(f"sweep.{key}", "unknown sweep key")
        grid = cls(**kw)
        if any(u <= 0 for u in grid.u0_abs):
            raise ConfigError("sweep.u0_abs", "radii must be > 0")
        if any(d < 0 for d in grid.delta):
            raise ConfigError("sweep.delta", "must be >= 0")
        if not grid.c > 0:
            raise ConfigError("sweep.c", "must be > 0")
        if not grid.t_end > 0:
            raise ConfigError("sweep.t_end", "must be > 0")
        return grid


def run_point(index: int, u0_abs: float, v0_abs: float, angle: float, delta: float,
              c: float, t_end: float, ctl: StepControl, escape_factor: float) -> dict:
    """One grid point; failures are recorded in the row instead of raised."""
    row = dict.fromkeys(SWEEP_COLUMNS, "")
    row.update(index=index, u0_abs=u0_abs, v0_abs=v0_abs, angle=angle, delta=delta)
    try:
        s0 = CartesianState(0.0, (u0_abs, 0.0),
                            (v0_abs * math.cos(angle), v0_abs * math.sin(angle)))
        traj = integrate_cartesian(s0, Params(delta=delta, c=c), ctl, t_end=t_end)
        d = traj.derived
        max_r = float(np.max(traj.table.r))
        row.update(M=d.M, F0=d.F0, E0=d.E0, small_ok=d.small_ok,
                   radius_bound=d.radius_bound if d.radius_bound is not None else "",
                   stop=traj.stop.kind, t_final=traj.t_final,
                   final_r=float(traj.table.r[-1]), max_r=max_r,
                   bounded_observed=max_r <= escape_factor * u0_abs)
        if d.small_ok:
            row["bound_ok"] = check_boundedness(traj).passed
        for key, rep in (("momentum_pass", check_momentum_law(traj)),
                         ("f_monotone_pass", check_f_monotone(traj)),
                         ("growth_pass", check_growth_bounds(traj))):
            row[key] = rep.passed if rep.applicable else "n/a"
    except Exception as exc:  # recorded, never aborts the sweep
        row["error"] = f"{type(exc).__name__}: {exc}".replace(",", ";").replace("\n", " ")
    return row


def _run_star(args):
    return run_point(*args)


def default_workers() -> int:
    env = os.environ.get("ORBITLAB_WORKERS")
    if env:
        try:
            n = int(env)
        except ValueError:
            raise ConfigError("ORBITLAB_WORKERS", f"not an integer: {env!r}") from None
        if n < 1:
            raise ConfigError("ORBITLAB_WORKERS", "must be >= 1")
        return n
    return 1


def run_sweep(grid: SweepGrid, ctl: StepControl = StepControl(), workers: int = 1) -> list[dict]:
    """Rows in grid order regardless of ``workers``."""
    jobs = [(i, u, v, a, d, grid.c, grid.t_end, ctl, grid.escape_factor)
            for i, (u, v, a, d) in enumerate(grid.points())]
    if workers <= 1:
        return [_run_star(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_star, jobs, chunksize=1))
