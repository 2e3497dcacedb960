"""Command-line experiment runner.

Subcommands: simulate, eigen, project, compare-schemes, reproduce-figures.
Every run writes a JSON summary echoing the configuration, so artifacts can
be regenerated bit-identically.  The pipeline contains no randomness.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import io
from .config import RunConfig, parse_config_file
from .diagnostics import (
    attractor_distance,
    balance_drift,
    oscillation_metrics,
)
from .errors import BlowupError, ConfigError, GrowFragError
from .grid import LN2, sample_initial
from .scheme import diffusive_reference_run, run
from .spectral import dominant_mode, evaluate_attractor, perron_profile, project

EXIT_CONFIG = 2
EXIT_NUMERIC = 3


def _add_override_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=str, default=None, help="key = value file")
    parser.add_argument("--out", type=str, default=None, help="output directory")
    parser.add_argument("--n", type=int, default=None, help="points per octave")
    parser.add_argument("--N", type=int, default=None, help="half extent in indices")
    parser.add_argument("--gamma", type=float, default=None, help="rate exponent")
    parser.add_argument("--rate-coeff", type=float, default=None)
    parser.add_argument("--K-modes", dest="K_modes", type=int, default=None)
    parser.add_argument(
        "--horizon-periods", dest="horizon_periods", type=float, default=None
    )
    parser.add_argument("--variant", choices=("exact", "diffusive"), default=None)
    parser.add_argument(
        "--cfl-fraction", dest="cfl_fraction", type=float, default=None
    )
    parser.add_argument("--mode", choices=("standard", "conservative"), default=None)
    parser.add_argument("--profile", choices=("peak", "smooth"), default=None)
    parser.add_argument("--snapshot-every", dest="snapshot_every", type=int, default=None)


def _config_from_args(args: argparse.Namespace) -> RunConfig:
    cfg = parse_config_file(args.config) if args.config else RunConfig()
    overrides = {}
    for key in (
        "out",
        "n",
        "N",
        "gamma",
        "rate_coeff",
        "K_modes",
        "horizon_periods",
        "variant",
        "cfl_fraction",
        "mode",
        "profile",
        "snapshot_every",
    ):
        value = getattr(args, key, None)
        if value is not None:
            overrides[key] = value
    if overrides:
        cfg = replace(cfg, **overrides)
    env_out = os.environ.get("GROWFRAG_OUT")
    if env_out:
        cfg = replace(cfg, out=env_out)
    return cfg.validate()


def _prepare(cfg: RunConfig):
    grid = cfg.build_grid()
    rate = cfg.build_rate(grid)
    return grid, rate


def _summary_core(cfg: RunConfig, grid) -> dict:
    return {"config": cfg.to_dict(), "grid": grid.to_metadata()}


def cmd_simulate(args: argparse.Namespace) -> int:
    cfg = _config_from_args(args)
    grid, rate = _prepare(cfg)
    state = sample_initial(cfg.build_profile(), grid)
    horizon = cfg.horizon_periods * LN2
    if cfg.variant == "diffusive":
        trajectory = diffusive_reference_run(
            state,
            rate,
            cfg.cfl_fraction,
            horizon,
            snapshot_every=cfg.snapshot_every,
            track_modes=cfg.track_modes,
        )
    else:
        trajectory = run(
            state,
            rate,
            horizon,
            snapshot_every=cfg.snapshot_every,
            track_modes=cfg.track_modes,
        )
    outdir = Path(cfg.out)
    io.write_trajectory_csv(outdir / "trajectory.csv", trajectory)
    io.write_series_csv(outdir / "series.csv", trajectory)
    summary = _summary_core(cfg, grid)
    summary["run"] = trajectory.meta
    summary["mass_leak_final"] = trajectory.series["mass_leak"][-1]
    if cfg.horizon_periods >= 5:
        try:
            metrics = oscillation_metrics(
                trajectory.series["t"], trajectory.series["max_rescaled"]
            )
            summary["oscillation"] = {
                "period": metrics.period,
                "amplitude_slope": metrics.amplitude_slope,
                "n_peaks": metrics.n_peaks,
            }
        except ValueError as exc:
            summary["oscillation"] = {"error": str(exc)}
    io.write_json(outdir / "summary.json", summary)
    print(f"wrote {outdir}/trajectory.csv, series.csv, summary.json")
    return 0


def cmd_eigen(args: argparse.Namespace) -> int:
    cfg = _config_from_args(args)
    grid, rate = _prepare(cfg)
    perron = perron_profile(rate, tolerance=cfg.eigen_tolerance)
    outdir = Path(cfg.out)
    io.write_csv(
        outdir / "eigen.csv",
        ["x", "re", "im"],
        ((grid.points[j], perron.profile[j], 0.0) for j in range(grid.size)),
    )
    summary = _summary_core(cfg, grid)
    summary["eigen"] = {
        "eigenvalue": perron.eigenvalue,
        "growth_rate": perron.growth_rate,
        "normalization_error": perron.normalization_error,
        "residual": perron.residual,
        "method": perron.method,
        "periods_averaged": perron.periods_averaged,
    }
    io.write_json(outdir / "eigen.json", summary)
    print(f"wrote {outdir}/eigen.csv, eigen.json")
    return 0


def cmd_project(args: argparse.Namespace) -> int:
    cfg = _config_from_args(args)
    grid, rate = _prepare(cfg)
    perron = perron_profile(rate, tolerance=cfg.eigen_tolerance)
    state = sample_initial(cfg.build_profile(), grid)
    coeffs = project(state, perron, K=cfg.K_modes)
    outdir = Path(cfg.out)
    io.write_coefficients_csv(outdir / "coefficients.csv", coeffs)
    summary = _summary_core(cfg, grid)
    summary["projection"] = {
        "K": coeffs.K,
        "bessel_slack": coeffs.bessel_slack,
        "state_norm_sq": coeffs.state_norm_sq,
    }
    io.write_json(outdir / "projection.json", summary)
    print(f"wrote {outdir}/coefficients.csv, projection.json")
    return 0


def cmd_compare_schemes(args: argparse.Namespace) -> int:
    cfg = _config_from_args(args)
    grid, rate = _prepare(cfg)
    state = sample_initial(cfg.build_profile(), grid)
    horizon = cfg.horizon_periods * LN2
    exact = run(state, rate, horizon, snapshot_every=1, track_modes=cfg.track_modes)
    diffusive = diffusive_reference_run(
        state,
        rate,
        cfg.cfl_fraction,
        horizon,
        snapshot_every=1,
        track_modes=cfg.track_modes,
    )
    perron = perron_profile(rate, tolerance=cfg.eigen_tolerance)
    coeffs = project(state, perron, K=cfg.K_modes)
    outdir = Path(cfg.out)
    comparison: dict = _summary_core(cfg, grid)
    for label, traj in (("exact", exact), ("diffusive", diffusive)):
        io.write_series_csv(outdir / f"series_{label}.csv", traj)
        entry: dict = {"mass_leak_final": traj.series["mass_leak"][-1]}
        try:
            metrics = oscillation_metrics(
                traj.series["t"], traj.series["max_rescaled"]
            )
            entry["period"] = metrics.period
            entry["amplitude_slope"] = metrics.amplitude_slope
        except ValueError as exc:
            entry["oscillation_error"] = str(exc)
        final = traj.state_at(len(traj.snapshot_steps) - 1)
        entry["final_attractor_distance"] = attractor_distance(
            final,
            coeffs,
            perron,
            t=final.time,
            calibrated=(label == "exact"),
        )
        comparison[label] = entry
    io.write_json(outdir / "comparison.json", comparison)
    print(f"wrote {outdir}/series_exact.csv, series_diffusive.csv, comparison.json")
    return 0


def cmd_reproduce_figures(args: argparse.Namespace) -> int:
    cfg = _config_from_args(args)
    if args.config is None and args.horizon_periods is None:
        cfg = replace(cfg, horizon_periods=8.0)
    cfg = cfg.validate()
    grid, rate = _prepare(cfg)
    outdir = Path(cfg.out)
    perron = perron_profile(rate, tolerance=cfg.eigen_tolerance)

    # Bundle 1: real parts of the first three dominant modes.
    modes = [dominant_mode(perron, k) for k in (0, 1, 2)]
    io.write_csv(
        outdir / "fig1_eigenmodes.csv",
        ["x", "re_mode0", "re_mode1", "re_mode2"],
        (
            (grid.points[j], modes[0][j].real, modes[1][j].real, modes[2][j].real)
            for j in range(grid.size)
        ),
    )

    # Bundle 2: both initial conditions.
    from .grid import peak_profile, smooth_profile

    peak0 = sample_initial(peak_profile(cfg.peak_location), grid)
    smooth0 = sample_initial(smooth_profile(), grid)
    io.write_csv(
        outdir / "fig2_initial_conditions.csv",
        ["x", "peak", "smooth"],
        (
            (grid.points[j], peak0.values[j].real, smooth0.values[j].real)
            for j in range(grid.size)
        ),
    )

    # Bundle 3: max of the rescaled solution against time, both runs.
    horizon = cfg.horizon_periods * LN2
    runs = {
        "peak": run(peak0, rate, horizon, snapshot_every=1),
        "smooth": run(smooth0, rate, horizon, snapshot_every=1),
    }
    t = runs["peak"].series["t"]
    io.write_csv(
        outdir / "fig3_max_series.csv",
        ["t", "peak_max_rescaled", "smooth_max_rescaled"],
        (
            (
                t[i],
                runs["peak"].series["max_rescaled"][i],
                runs["smooth"].series["max_rescaled"][i],
            )
            for i in range(len(t))
        ),
    )

    # Bundle 4: five rescaled snapshots per initial condition inside one cycle.
    def snapshot_rows():
        for label, traj in runs.items():
            burn_steps = traj.meta["n_steps"] - grid.n
            picks = [burn_steps + m * (grid.n // 5) for m in range(5)]
            for snap_idx, l in enumerate(picks):
                i = int(np.argmin(np.abs(traj.snapshot_steps - l)))
                values = traj.rescaled_snapshot(i)
                t_i = traj.snapshot_steps[i] * traj.dt_step
                for j in range(grid.size):
                    yield (label, snap_idx, t_i, grid.points[j], values[j].real)

    io.write_csv(
        outdir / "fig4_snapshots.csv",
        ["profile", "snapshot", "t", "x", "re_u_rescaled"],
        snapshot_rows(),
    )

    summary = _summary_core(cfg, grid)
    summary["bundles"] = [
        "fig1_eigenmodes.csv",
        "fig2_initial_conditions.csv",
        "fig3_max_series.csv",
        "fig4_snapshots.csv",
    ]
    summary["eigen"] = {
        "residual": perron.residual,
        "normalization_error": perron.normalization_error,
    }
    io.write_json(outdir / "figures_metadata.json", summary)
    print(f"wrote figure bundles to {outdir}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="growfrag",
        description="Growth-fragmentation simulator and spectral toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in (
        ("simulate", cmd_simulate),
        ("eigen", cmd_eigen),
        ("project", cmd_project),
        ("compare-schemes", cmd_compare_schemes),
        ("reproduce-figures", cmd_reproduce_figures),
    ):
        p = sub.add_parser(name)
        _add_override_flags(p)
        p.set_defaults(func=fn)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration rejected: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except BlowupError as exc:
        print(f"numerical abort at step {exc.step}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except GrowFragError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    raise SystemExit(main())
