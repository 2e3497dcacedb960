"""CSV and JSON writers for run artifacts.

Floats are written with 17 significant digits so reruns of a deterministic
pipeline produce byte-identical files.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from .grid import StateVector
from .scheme import Trajectory


def _fmt(value) -> str:
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return f"{float(value):.17g}"


def write_csv(path: Path, header: list[str], rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def write_trajectory_csv(path: Path, trajectory: Trajectory) -> None:
    """Long-format snapshots: one row per (snapshot, grid point)."""
    grid = trajectory.grid
    lam0 = trajectory.growth_exponent

    def rows():
        for i, l in enumerate(trajectory.snapshot_steps):
            t = l * trajectory.dt_step
            rescale = math.exp(-lam0 * t)
            snap = trajectory.snapshots[i]
            for j in range(grid.size):
                u = snap[j]
                yield (
                    t,
                    grid.points[j],
                    u.real,
                    u.imag,
                    u.real * rescale,
                    u.imag * rescale,
                )

    write_csv(
        path,
        ["t", "x", "re_u", "im_u", "re_u_rescaled", "im_u_rescaled"],
        rows(),
    )


def write_series_csv(path: Path, trajectory: Trajectory) -> None:
    series = trajectory.series
    header = ["t", "max_rescaled", "first_moment", "e2_norm", "d2", "mass_leak"]
    has_e2 = "e2_norm" in series

    def rows():
        for i in range(len(series["t"])):
            yield (
                series["t"][i],
                series["max_rescaled"][i],
                series["first_moment"][i].real,
                series["e2_norm"][i] if has_e2 else math.nan,
                series["d2"][i] if has_e2 else math.nan,
                series["mass_leak"][i],
            )

    write_csv(path, header, rows())


def write_profile_csv(path: Path, state: StateVector) -> None:
    grid = state.grid
    rows = (
        (grid.points[j], state.values[j].real, state.values[j].imag)
        for j in range(grid.size)
    )
    write_csv(path, ["x", "re", "im"], rows)


def write_coefficients_csv(path: Path, coeffs) -> None:
    rows = (
        (int(k), c.real, c.imag, abs(c))
        for k, c in zip(coeffs.ks, coeffs.coeffs)
    )
    write_csv(path, ["k", "re_c", "im_c", "abs_c"], rows)


def _jsonable(value):
    if isinstance(value, (np.floating, float)):
        v = float(value)
        return v if math.isfinite(v) else None
    if isinstance(value, (np.integer, int)):
        return int(value)
    if isinstance(value, np.ndarray):
        return [_jsonable(v) for v in value.tolist()]
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    return value


def write_json(path: Path, payload: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(_jsonable(payload), fh, indent=2, sort_keys=True)
        fh.write("\n")
