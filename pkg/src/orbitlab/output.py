"""Serialisation: trajectory CSV, JSON documents and a minimal SVG orbit plot."""

from __future__ import annotations

import json
import math
from typing import Iterable, Sequence

import numpy as np

from .integrator import Trajectory

CSV_COLUMNS = ("t", "re_u", "im_u", "re_v", "im_v", "r", "theta", "L", "E", "F")


def _fmt(x) -> str:
    # repr() of a Python float is the shortest round-trip decimal
    return repr(float(x))


def write_rows(path: str, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(x) if isinstance(x, (float, np.floating)) else str(x)
                              for x in row) + "\n")


def trajectory_rows(traj: Trajectory):
    T = traj.table
    cols = np.column_stack([T.t, T.u[:, 0], T.u[:, 1], T.v[:, 0], T.v[:, 1],
                            T.r, T.theta, T.L, T.E, T.F])
    for row in cols.tolist():
        yield row


def write_trajectory_csv(traj: Trajectory, path: str) -> None:
    write_rows(path, CSV_COLUMNS, trajectory_rows(traj))


def read_trajectory_csv(path: str) -> dict[str, np.ndarray]:
    with open(path) as fh:
        header = fh.readline().strip().split(",")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return {name: data[:, i] for i, name in enumerate(header)}


def _clean(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    return obj


def dumps(obj) -> str:
    return json.dumps(_clean(obj), indent=2, allow_nan=False) + "\n"


def write_json(obj, path: str) -> None:
    with open(path, "w") as fh:
        fh.write(dumps(obj))


def trajectory_summary(traj: Trajectory) -> dict:
    return {
        "formulation": traj.formulation,
        "model": traj.model,
        "params": {"delta": traj.params.delta, "c": traj.params.c, "alpha": traj.params.alpha},
        "derived": traj.derived.as_dict(),
        "stop": traj.stop.as_dict(),
        "t_final": traj.t_final,
        "n_samples": len(traj),
        "n_steps": traj.n_steps,
        "n_rejected": traj.n_rejected,
        "max_r": float(np.max(traj.table.r)),
        "final_r": float(traj.table.r[-1]),
    }


MAX_PLOT_POINTS = 20000


def _polyline(xs, ys) -> str:
    return " ".join(f"{x:.3f},{y:.3f}" for x, y in zip(xs, ys))


def orbit_svg(traj: Trajectory, size: int = 640) -> str:
    """Planar path of u(t) with an inset of log10 r against t."""
    T = traj.table
    stride = max(1, math.ceil(len(T) / MAX_PLOT_POINTS))
    idx = np.arange(0, len(T), stride)
    if idx[-1] != len(T) - 1:
        idx = np.append(idx, len(T) - 1)
    x, y = T.u[idx, 0], T.u[idx, 1]
    ext = float(max(np.max(np.abs(x)), np.max(np.abs(y)))) or 1.0
    pad = 20
    half = (size - 2 * pad) / 2
    px = size / 2 + x / ext * half
    py = size / 2 - y / ext * half

    iw, ih, ix, iy = size * 0.35, size * 0.2, size * 0.62, size * 0.03
    t = T.t[idx]
    lr = np.log10(T.r[idx])
    span_t = float(t[-1] - t[0]) or 1.0
    lo, hi = float(np.min(lr)), float(np.max(lr))
    span_r = (hi - lo) or 1.0
    qx = ix + (t - t[0]) / span_t * iw
    qy = iy + ih - (lr - lo) / span_r * ih

    return "\n".join([
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
        f'viewBox="0 0 {size} {size}">',
        f'<rect width="{size}" height="{size}" fill="white"/>',
        f'<circle cx="{size / 2:.3f}" cy="{size / 2:.3f}" r="3" fill="black"/>',
        f'<polyline fill="none" stroke="steelblue" stroke-width="0.8" '
        f'points="{_polyline(px, py)}"/>',
        f'<rect x="{ix:.3f}" y="{iy:.3f}" width="{iw:.3f}" height="{ih:.3f}" '
        f'fill="white" stroke="gray"/>',
        f'<polyline fill="none" stroke="firebrick" stroke-width="0.8" '
        f'points="{_polyline(qx, qy)}"/>',
        f'<text x="{ix + 4:.3f}" y="{iy + 12:.3f}" font-size="10">log10 r vs t '
        f'[{lo:.2f}, {hi:.2f}]</text>',
        f'<text x="{pad}" y="{size - 6}" font-size="11">{traj.model} / {traj.formulation}, '
        f'delta={traj.params.delta:g}, c={traj.params.c:g}, t=[{T.t[0]:g}, {T.t[-1]:g}]</text>',
        "</svg>",
        "",
    ])


def write_svg(traj: Trajectory, path: str) -> None:
    with open(path, "w") as fh:
        fh.write(orbit_svg(traj))
