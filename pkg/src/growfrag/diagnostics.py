"""Entropy functionals, weighted norms, drifts and oscillation metrics."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .grid import LN2, GeometricGrid, StateVector
from .scheme import DivisionRate, Trajectory
from .spectral import (
    ModeCoefficients,
    PerronSolution,
    adjoint_moment,
    e2_norm,
    evaluate_attractor,
    mode_phase,
)

__all__ = [
    "EntropyReport",
    "OscillationMetrics",
    "quadratic_dissipation",
    "relative_entropy",
    "H_QUADRATIC",
    "H_ABS",
    "hinge",
    "weighted_norm",
    "balance_drift",
    "attractor_distance",
    "attractor_distance_series",
    "cesaro_average",
    "oscillation_metrics",
    "entropy_report",
]


def _values(u) -> np.ndarray:
    return u.values if isinstance(u, StateVector) else np.asarray(u)


def quadratic_dissipation(u, perron: PerronSolution, rate: DivisionRate) -> float:
    """Quadratic entropy dissipation of ``u`` relative to the profile.

    Quadrature of ``x B U |u/U - (u/U)(x/2)|**2`` over cells whose halved
    partner is on the grid; halving reads index ``k - n`` exactly, never
    interpolating.  Cells floored in the profile are skipped, as are the
    bottom ``n`` cells whose partner would fall below the grid (both the
    state and the profile vanish there, so the ratio pair is dropped).
    Zero iff the ratio ``u/U`` is constant along every dyadic orbit.
    """
    grid = perron.grid
    n = grid.n
    uv = _values(u)
    ratios = np.where(perron.mask, uv / np.where(perron.mask, perron.profile, 1.0), 0.0)
    valid = perron.mask[n:] & perron.mask[:-n]
    jump = np.abs(ratios[n:] - ratios[:-n]) ** 2
    weight = grid.points[n:] * rate.samples[n:] * perron.profile[n:]
    cell_w = np.empty(grid.size - n)
    cell_w[:] = np.concatenate(([0.0], grid.widths))[n:]
    return float(np.sum(np.where(valid, weight * jump * cell_w, 0.0)))


def H_QUADRATIC(z: np.ndarray) -> np.ndarray:
    return np.abs(z) ** 2


def H_ABS(z: np.ndarray) -> np.ndarray:
    return np.abs(z)


def hinge(level: float):
    """Convex hinge ``max(|z| - level, 0)``; the sup-norm witness."""

    def h(z: np.ndarray) -> np.ndarray:
        return np.maximum(np.abs(z) - level, 0.0)

    return h


def relative_entropy(u, t: float, perron: PerronSolution, H=H_QUADRATIC) -> float:
    """Quadrature of ``x U H(u / (U e^t))`` over unfloored cells."""
    grid = perron.grid
    uv = _values(u)
    z = np.where(
        perron.mask,
        uv * math.exp(-t) / np.where(perron.mask, perron.profile, 1.0),
        0.0,
    )
    h = np.asarray(H(z), dtype=float)
    cell_w = np.concatenate(([0.0], grid.widths))
    integrand = np.where(perron.mask, grid.points * perron.profile * h * cell_w, 0.0)
    return float(np.sum(integrand))


def weighted_norm(u, perron: PerronSolution, p: float = 2.0) -> float:
    """Norm with weight ``x U**(1-p)``; ``p = inf`` gives ``max |u|/U``.

    Floored tail cells are skipped consistently for every ``p``, so the
    nesting ``p <= q  =>  norm_p <= norm_q`` holds at the discrete level.
    """
    uv = _values(u)
    if math.isinf(p):
        ratios = np.where(
            perron.mask, np.abs(uv) / np.where(perron.mask, perron.profile, 1.0), 0.0
        )
        return float(np.max(ratios))
    if p < 1:
        raise ValueError("p must be at least 1")
    grid = perron.grid
    cell_w = np.concatenate(([0.0], grid.widths))
    integrand = np.where(
        perron.mask,
        np.abs(uv) ** p
        * grid.points
        * np.where(perron.mask, perron.profile, 1.0) ** (1.0 - p)
        * cell_w,
        0.0,
    )
    return float(np.sum(integrand) ** (1.0 / p))


def balance_drift(trajectory: Trajectory, k: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Drift ``|m_k(t) e^{-lambda_k t} - m_k(0)|`` along a run.

    ``lambda_k = lambda0 + 2 i k pi / log 2`` with the kernel's growth
    exponent ``lambda0``; the moment weights are ``x**lambda0`` times the
    k-th twist.  Uses the per-step tracked series when available, falling
    back to the stored snapshots.
    """
    lam0 = trajectory.growth_exponent
    key = f"moment_{k}"
    if key in trajectory.series:
        t = trajectory.series["t"]
        moments = trajectory.series[key]
    else:
        t = trajectory.times
        grid = trajectory.grid
        weight = grid.points**lam0 * mode_phase(grid, -k)
        moments = np.array(
            [complex(grid.quadrature(s * weight)) for s in trajectory.snapshots]
        )
    rescale = np.exp(-(lam0 + 2j * np.pi * k / LN2) * t)
    rescaled = moments * rescale
    return np.asarray(t), np.abs(rescaled - rescaled[0])


def attractor_distance(
    state: StateVector,
    coeffs: ModeCoefficients,
    perron: PerronSolution,
    t: float | None = None,
    calibrated: bool = True,
) -> float:
    """Weighted distance between the rescaled state and the periodic limit.

    With ``calibrated=True`` (default, requires ``state.steps``) the state is
    rescaled by ``mu**(-steps)``, with ``mu`` the measured one-step growth
    factor of the scheme, and the limit is evaluated at the transport clock
    ``steps * log(2)/n``: the shift substep is the exact flow over
    ``log(2)/n`` and the peripheral family of the one-step operator rotates
    by exactly one n-th of a cycle per step at common modulus ``mu``, so
    this pairing removes the O(dx) clock skew of the Euler bookkeeping and
    exposes the convergence floor.  With ``calibrated=False`` the literal
    ``e^{-lambda t}`` rescaling and phase ``t`` are used.
    """
    grid = perron.grid
    if calibrated and state.steps is not None:
        l = state.steps
        rescale = perron.step_growth ** float(-l)
        tau = l * grid.dy
    else:
        if t is None:
            t = state.time
        rescale = math.exp(-perron.eigenvalue * t)
        tau = t
    limit = evaluate_attractor(coeffs, perron, tau)
    return e2_norm(state.values * rescale - limit.values, perron)


def attractor_distance_series(
    trajectory: Trajectory,
    coeffs: ModeCoefficients,
    perron: PerronSolution,
    calibrated: bool = True,
) -> tuple[np.ndarray, np.ndarray]:
    """Attractor distance at every stored snapshot."""
    dists = np.array(
        [
            attractor_distance(
                trajectory.state_at(i), coeffs, perron, calibrated=calibrated
            )
            for i in range(len(trajectory.snapshot_steps))
        ]
    )
    return trajectory.times, dists


def cesaro_average(
    trajectory: Trajectory, perron: PerronSolution | None = None
) -> np.ndarray:
    """Time average of the rescaled snapshots.

    Without a Perron solution the snapshots are rescaled by
    ``e^{-lambda0 t}`` on the step clock.  With one, the measured one-step
    growth factor is used instead, which removes the O(dx) exponential
    drift of the Euler clock and leaves the pure ergodic 1/T decay of the
    rotating modes.
    """
    count = len(trajectory.snapshot_steps)
    if count == 0:
        raise ValueError("trajectory holds no snapshots")
    total = np.zeros(trajectory.grid.size, dtype=complex)
    for i in range(count):
        if perron is None:
            total += trajectory.rescaled_snapshot(i)
        else:
            l = int(trajectory.snapshot_steps[i])
            total += trajectory.snapshots[i] * perron.step_growth ** float(-l)
    return total / count


@dataclass(frozen=True)
class OscillationMetrics:
    period: float
    amplitude_slope: float
    n_peaks: int
    peak_times: np.ndarray
    amplitudes: np.ndarray


def oscillation_metrics(
    times: np.ndarray,
    values: np.ndarray,
    burn_in_periods: float = 2.0,
    period_hint: float = LN2,
) -> OscillationMetrics:
    """Period and amplitude trend of a scalar oscillation series.

    Peaks are three-point local maxima after the burn-in window, pruned so
    that two peaks are at least ``0.6 * period_hint`` apart (the higher one
    wins); damped combs develop secondary shoulders that bare three-point
    detection would count as extra cycles.  The period is the mean peak
    spacing; the amplitude trend is the slope of ``log(peak - trough)`` per
    cycle.  Raises ``ValueError`` with fewer than three detected peaks.
    """
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    keep = times >= burn_in_periods * period_hint
    t = times[keep]
    v = values[keep]
    if v.size < 5:
        raise ValueError("series too short after burn-in")
    interior = np.arange(1, v.size - 1)
    is_peak = (v[interior] > v[interior - 1]) & (v[interior] > v[interior + 1])
    peaks = interior[is_peak]
    min_sep = 0.6 * period_hint
    kept: list[int] = []
    for i in peaks[np.argsort(v[peaks])[::-1]]:
        if all(abs(t[i] - t[j]) >= min_sep for j in kept):
            kept.append(int(i))
    peaks = np.asarray(sorted(kept), dtype=int)
    if peaks.size < 3:
        raise ValueError(f"found {peaks.size} peaks; need at least 3")
    period = float(np.mean(np.diff(t[peaks])))
    amps = []
    for a, b in zip(peaks[:-1], peaks[1:]):
        amp = v[a] - float(np.min(v[a : b + 1]))
        if amp > 0:
            amps.append(amp)
    amps = np.asarray(amps)
    if amps.size >= 2:
        slope = float(np.polyfit(np.arange(amps.size), np.log(amps), 1)[0])
    else:
        slope = 0.0
    return OscillationMetrics(
        period=period,
        amplitude_slope=slope,
        n_peaks=int(peaks.size),
        peak_times=t[peaks],
        amplitudes=amps,
    )


@dataclass(frozen=True)
class EntropyReport:
    """Scalar diagnostics of one rescaled state."""

    time: float
    e1: float
    e2: float
    e_inf: float
    d2: float
    gre_value: float
    moments: dict[int, complex]
    attractor_distance: float | None
    mass_leak: float | None


def entropy_report(
    state: StateVector,
    perron: PerronSolution,
    rate: DivisionRate,
    coeffs: ModeCoefficients | None = None,
    tracked: tuple[int, ...] = (0, 1),
    mass_leak: float | None = None,
) -> EntropyReport:
    t = state.time
    lam0 = perron.eigenvalue
    w = state.values * math.exp(-lam0 * t)
    moments = {
        k: adjoint_moment(state, k, perron.grid, power=lam0)
        * np.exp(-(lam0 + 2j * np.pi * k / LN2) * t)
        for k in tracked
    }
    dist = (
        attractor_distance(state, coeffs, perron) if coeffs is not None else None
    )
    return EntropyReport(
        time=t,
        e1=weighted_norm(w, perron, 1.0),
        e2=weighted_norm(w, perron, 2.0),
        e_inf=weighted_norm(w, perron, math.inf),
        d2=quadratic_dissipation(w, perron, rate),
        gre_value=relative_entropy(state, t * lam0, perron),
        moments=moments,
        attractor_distance=dist,
        mass_leak=mass_leak,
    )
