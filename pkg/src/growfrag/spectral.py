"""Stationary profile, dominant mode family, projections and the attractor.

On the geometric grid ``log2(x_j) = (j - N)/n`` exactly, so the unit-modulus
mode twists ``x**(-2 i k pi / log 2)`` are evaluated from integer index
residues.  This keeps the whole family exactly periodic across octaves:
the twist at ``x`` and ``2x`` is bitwise identical.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConvergenceError, GrowFragError
from .grid import LN2, GeometricGrid, Profile, StateVector, sample_initial, smooth_profile
from .scheme import DivisionRate, step

__all__ = [
    "PerronSolution",
    "ModeCoefficients",
    "mode_phase",
    "perron_profile",
    "dominant_mode",
    "inner_product",
    "e2_norm",
    "project",
    "evaluate_attractor",
    "evaluate_attractor_poisson",
    "adjoint_moment",
    "build_step_matrix",
]


def mode_phase(grid: GeometricGrid, k: int) -> np.ndarray:
    """Unit-modulus twist ``x_j**(-2 i k pi / log 2)`` evaluated exactly.

    Computed from the integer residue ``(k (j - N)) mod n`` so the phase is
    bitwise equal at ``x`` and ``2x`` and aliases exactly for ``k`` shifted
    by multiples of ``n``.
    """
    residues = (k * (np.arange(grid.size) - grid.N)) % grid.n
    return np.exp((-2j * np.pi / grid.n) * residues)


@dataclass(frozen=True)
class PerronSolution:
    """Positive stationary profile with normalization and residual certificates.

    ``profile`` has unit quadrature first moment; ``eigenvalue`` is the
    dominant growth exponent implied by the kernel mode (1 for standard,
    0 for conservative).  ``residual`` is the size-weighted norm of the
    one-step stationarity defect ``step(U) e^{-lambda dt} - U``;
    ``step_growth`` is the measured one-step growth factor ``mu`` of the
    first moment (the dominant eigenvalue of the one-step operator,
    boundary losses included) and ``growth_rate = log(mu)/dt``.

    Weighted inner products skip cells where the profile falls below
    ``floor_rel`` times its maximum, where the ratio weights ``x/U`` are
    numerically meaningless.
    """

    grid: GeometricGrid
    mode: str
    profile: np.ndarray
    eigenvalue: float
    normalization_error: float
    residual: float
    growth_rate: float
    step_growth: float
    method: str
    periods_averaged: int
    floor_rel: float = 1e-30
    mask: np.ndarray = field(init=False, repr=False, compare=False)
    e2_weights: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        profile = np.asarray(self.profile, dtype=float)
        if profile.shape != (self.grid.size,):
            raise ValueError("profile length does not match grid")
        profile.setflags(write=False)
        object.__setattr__(self, "profile", profile)
        mask = profile > self.floor_rel * profile.max()
        mask[0] = False  # the bottom cell carries no quadrature weight
        if not mask.any():
            raise GrowFragError("degenerate profile: every cell floored")
        weights = np.zeros(self.grid.size)
        x = self.grid.points
        weights[1:] = x[1:] * self.grid.widths
        weights = np.where(mask, weights / np.where(mask, profile, 1.0), 0.0)
        mask.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "mask", mask)
        object.__setattr__(self, "e2_weights", weights)

    @property
    def mode_index(self) -> int:
        """Grid index of the profile maximum."""
        return int(np.argmax(self.profile))


def _as_values(u) -> np.ndarray:
    if isinstance(u, StateVector):
        return u.values
    return np.asarray(u)


def inner_product(f, g, perron: PerronSolution) -> complex:
    """Weighted inner product ``sum f conj(g) x w / U`` over unfloored cells.

    Conjugate symmetric: ``(f, g) = conj((g, f))``.
    """
    fv = _as_values(f)
    gv = _as_values(g)
    return complex(np.sum(fv * np.conj(gv) * perron.e2_weights))


def e2_norm(f, perron: PerronSolution) -> float:
    fv = _as_values(f)
    return float(math.sqrt(max(np.sum(np.abs(fv) ** 2 * perron.e2_weights), 0.0)))


def dominant_mode(perron: PerronSolution, k: int) -> np.ndarray:
    """Mode ``k`` of the dominant family: the profile times the k-th twist."""
    return mode_phase(perron.grid, k) * perron.profile


def adjoint_moment(u, k: int, grid: GeometricGrid, power: float = 1.0) -> complex:
    """Complex moment against ``x**(power + 2 i k pi / log 2)``.

    ``power`` is 1 for the standard kernel's conserved family and 0 for the
    conservative kernel's.
    """
    weight = grid.points**power * mode_phase(grid, -k)
    return complex(grid.quadrature(_as_values(u) * weight))


@dataclass(frozen=True)
class ModeCoefficients:
    """Truncated mode expansion ``c_k = (u0, U_k)`` of an initial state."""

    ks: np.ndarray
    coeffs: np.ndarray
    bessel_slack: float
    state_norm_sq: float

    def __post_init__(self) -> None:
        ks = np.asarray(self.ks, dtype=int)
        coeffs = np.asarray(self.coeffs, dtype=complex)
        if ks.shape != coeffs.shape:
            raise ValueError("ks and coeffs must align")
        ks.setflags(write=False)
        coeffs.setflags(write=False)
        object.__setattr__(self, "ks", ks)
        object.__setattr__(self, "coeffs", coeffs)

    @property
    def K(self) -> int:
        return int(np.max(np.abs(self.ks)))

    def coefficient(self, k: int) -> complex:
        idx = np.nonzero(self.ks == k)[0]
        if idx.size == 0:
            raise KeyError(f"mode {k} not in expansion")
        return complex(self.coeffs[idx[0]])


def project(
    u0,
    perron: PerronSolution,
    K: int = 16,
    ks=None,
    bessel_tol: float = 1e-8,
) -> ModeCoefficients:
    """Coefficients of ``u0`` on the dominant modes ``k = -K..K``.

    With ``n`` points per octave the grid resolves exactly ``n`` distinct
    mode twists; requesting ``|k| > n/2`` would silently return the aliased
    copy of ``c_{k mod n}``, so coefficients beyond the Nyquist class are
    reported as zero instead.  ``ks`` overrides the symmetric range (used
    e.g. to enumerate each aliasing class exactly once).  Raises if the
    Bessel inequality is violated beyond ``bessel_tol`` relative, which
    signals an inconsistent quadrature or a stale stationary profile.
    """
    if ks is None:
        if K < 0:
            raise ValueError("K must be nonnegative")
        ks = np.arange(-K, K + 1)
    else:
        ks = np.asarray(list(ks), dtype=int)
    uv = _as_values(u0)
    # The profile cancels in (u0, U_k): it reduces to an adjoint moment over
    # unfloored cells, so compute it directly from the weights.
    base = uv * perron.e2_weights * perron.profile
    nyquist = perron.grid.n / 2.0
    coeffs = np.array(
        [
            complex(np.sum(base * np.conj(mode_phase(perron.grid, k))))
            if abs(k) <= nyquist
            else 0.0j
            for k in ks
        ]
    )
    norm_sq = float(np.sum(np.abs(uv) ** 2 * perron.e2_weights).real)
    slack = norm_sq - float(np.sum(np.abs(coeffs) ** 2))
    if slack < -bessel_tol * max(norm_sq, 1e-300):
        raise GrowFragError(
            f"Bessel inequality violated: slack {slack:.3e} for norm^2 {norm_sq:.3e}"
        )
    return ModeCoefficients(
        ks=ks, coeffs=coeffs, bessel_slack=slack, state_norm_sq=norm_sq
    )


def evaluate_attractor(
    coeffs: ModeCoefficients, perron: PerronSolution, t: float
) -> StateVector:
    """Truncated periodic limit ``sum_k c_k e^{2 i k pi t / log 2} U_k``.

    ``t`` is reduced modulo ``log 2`` before the phases are formed, so the
    output is exactly periodic.
    """
    tr = math.fmod(t, LN2)
    grid = perron.grid
    field = np.zeros(grid.size, dtype=complex)
    for k, c in zip(coeffs.ks, coeffs.coeffs):
        field += (c * np.exp(2j * np.pi * k * tr / LN2)) * mode_phase(grid, int(k))
    field *= perron.profile
    return StateVector(values=field, time=max(t, 0.0), grid=grid, steps=None)


def evaluate_attractor_poisson(
    u0_profile: Profile, perron: PerronSolution, t: float
) -> StateVector:
    """Periodic limit in folded form, using the initial profile directly.

    Evaluates ``log(2) U(x) sum_l a_l**2 u0(a_l)`` with
    ``a_l = 2**(-l) x e^{-t}``, the terms kept while ``a_l`` lies in
    ``[x_min/2, 2 x_max]``.  The ``log 2`` prefactor comes from the period
    in the Poisson summation identity
    ``sum_l f(y + l a) = (1/a) sum_k Ff(2 pi k / a) e^{2 i pi k y / a}``;
    a further factor ``dt / (log 2 / n)`` expresses the result in the same
    quadrature normalization as the projected coefficients.  The combined
    scale is ``n dt``, and the output matches ``evaluate_attractor`` for
    smooth profiles and large ``K``.
    """
    grid = perron.grid
    tr = math.fmod(t, LN2)
    decay = math.exp(-tr)
    lo = grid.x_min / 2.0
    hi = 2.0 * grid.x_max
    x = grid.points
    l_min = math.floor(math.log2(decay * grid.x_min / hi))
    l_max = math.ceil(math.log2(decay * grid.x_max / lo))
    total = np.zeros(grid.size, dtype=complex)
    for l in range(l_min, l_max + 1):
        args = (decay * 2.0**-l) * x
        window = (args >= lo) & (args <= hi)
        if not window.any():
            continue
        vals = np.zeros(grid.size, dtype=complex)
        vals[window] = np.asarray(u0_profile.evaluator(args[window]), dtype=complex)
        total += args**2 * vals
    scale = grid.n * grid.dt  # = log(2) * (dt / dy)
    values = scale * perron.profile * total
    return StateVector(values=values, time=max(t, 0.0), grid=grid, steps=None)


def build_step_matrix(rate: DivisionRate) -> np.ndarray:
    """Dense one-step matrix assembled by stepping the canonical basis."""
    grid = rate.grid
    m = np.empty((grid.size, grid.size))
    basis = np.zeros(grid.size, dtype=complex)
    for j in range(grid.size):
        basis[:] = 0.0
        basis[j] = 1.0
        out = step(StateVector(values=basis, time=0.0, grid=grid), rate)
        m[:, j] = out.values.real
    return m


def _stationarity_residual(
    rate: DivisionRate, profile: np.ndarray
) -> tuple[float, float, float]:
    """One-step rescaled defect, measured growth rate, and step growth factor."""
    grid = rate.grid
    state = StateVector(values=profile.astype(complex), time=0.0, grid=grid)
    advanced = step(state, rate).values.real
    rescale = math.exp(-rate.growth_exponent * grid.dt)
    defect = advanced * rescale - profile
    residual = float(grid.first_moment(np.abs(defect)).real)
    q0 = float(grid.first_moment(profile).real)
    q1 = float(grid.first_moment(advanced).real)
    mu = q1 / q0 if q0 > 0 else math.nan
    growth = math.log(mu) / grid.dt if mu > 0 else math.nan
    return residual, growth, mu


def perron_profile(
    rate: DivisionRate,
    *,
    seed: Profile | None = None,
    tolerance: float | None = None,
    method: str = "cesaro",
    floor_rel: float = 1e-30,
    burn_in_periods: int = 8,
    min_periods: int = 12,
    max_periods: int = 4000,
    residual_tol: float = 1e-3,
) -> PerronSolution:
    """Compute the positive stationary profile, normalized to unit first moment.

    The default method runs the scheme from a positive seed and time-averages
    the rescaled solution over full oscillation cycles (mean ergodicity).
    It stops once consecutive cycle averages agree to ``tolerance`` in the
    size-weighted norm, with a geometric-tail bound on the remaining
    transient, and returns the average of the final two cycles so that the
    slowly decaying part of the burn-in cannot pollute the result.
    ``method="matrix"`` assembles the one-step matrix and solves for the
    real eigenvalue by shift-inverted Arnoldi; it serves as an independent
    cross-check.

    Raises ``ConvergenceError`` if the stopping rule or the residual
    certificate cannot be met.
    """
    if not rate.is_positive:
        raise GrowFragError("stationary profile requires a positive division rate")
    rate.require_stable()
    grid = rate.grid
    if tolerance is None:
        tolerance = 0.05 * grid.dx**2

    if method == "matrix":
        profile, periods = _matrix_profile(rate)
    elif method == "cesaro":
        profile, periods = _cesaro_profile(
            rate,
            seed=seed,
            tolerance=tolerance,
            burn_in_periods=burn_in_periods,
            min_periods=min_periods,
            max_periods=max_periods,
        )
    else:
        raise ValueError("method must be 'cesaro' or 'matrix'")

    profile = profile / float(grid.first_moment(profile).real)
    norm_err = abs(float(grid.first_moment(profile).real) - 1.0)
    residual, growth, mu = _stationarity_residual(rate, profile)
    if residual > residual_tol:
        raise ConvergenceError(
            f"stationarity residual {residual:.3e} exceeds tolerance {residual_tol:.1e}"
        )
    return PerronSolution(
        grid=grid,
        mode=rate.mode,
        profile=profile,
        eigenvalue=rate.growth_exponent,
        normalization_error=norm_err,
        residual=residual,
        growth_rate=growth,
        step_growth=mu,
        method=method,
        periods_averaged=periods,
        floor_rel=floor_rel,
    )


def _cesaro_profile(
    rate: DivisionRate,
    *,
    seed: Profile | None,
    tolerance: float,
    burn_in_periods: int,
    min_periods: int,
    max_periods: int,
) -> tuple[np.ndarray, int]:
    grid = rate.grid
    if seed is None:
        seed = smooth_profile()
    state = sample_initial(seed, grid)
    w = state.values.real.astype(float)
    if np.any(w < 0) or not np.any(w > 0):
        raise GrowFragError("seed must be nonnegative and not identically zero")
    w = w / float(grid.first_moment(w).real)

    n = grid.n  # steps per oscillation cycle
    # Normalize by the kernel's conserved functional after every step: by
    # biorthogonality that functional carries none of the rotating modes,
    # so summing the normalized states over one full cycle cancels them
    # exactly and the cycle average converges to the stationary direction.
    if rate.mode == "standard":
        conserved = lambda v: float(grid.first_moment(v).real)  # noqa: E731
    else:
        conserved = lambda v: float(grid.quadrature(v).real)  # noqa: E731
    last_windows: list[np.ndarray] = []
    prev_hat: np.ndarray | None = None
    prev_diff: float | None = None
    current = StateVector(values=w.astype(complex), time=0.0, grid=grid)

    for period in range(1, max_periods + 1):
        window = np.zeros_like(w)
        for _ in range(n):
            current = step(current, rate)
            q_step = conserved(current.values.real)
            if q_step <= 0 or not math.isfinite(q_step):
                raise ConvergenceError("iteration lost positivity")
            values = current.values.real / q_step
            current = StateVector(
                values=values.astype(complex), time=0.0, grid=grid, steps=0
            )
            window += values
        q = float(grid.first_moment(window).real)
        if q <= 0 or not math.isfinite(q):
            raise ConvergenceError("cycle average lost positivity")
        last_windows = (last_windows + [window])[-2:]
        window_hat = window / q
        if prev_hat is not None and period > burn_in_periods + min_periods:
            diff = float(grid.first_moment(np.abs(window_hat - prev_hat)).real)
            # geometric-tail bound on the remaining transient:
            # error of the newest window <= diff * q/(1-q) with q the
            # per-cycle contraction estimated from consecutive diffs
            ratio = 0.5 if prev_diff is None or prev_diff <= 0 else diff / prev_diff
            ratio = min(max(ratio, 0.0), 0.95)
            tail = diff * ratio / (1.0 - ratio)
            if diff < 0.5 * tolerance and tail < 0.5 * tolerance:
                return np.sum(last_windows, axis=0), period
            prev_diff = diff
        prev_hat = window_hat
    raise ConvergenceError(
        f"cycle averages did not settle below {tolerance:.2e} "
        f"within {max_periods} periods"
    )


def _matrix_profile(rate: DivisionRate) -> tuple[np.ndarray, int]:
    from scipy.sparse import csc_matrix
    from scipy.sparse.linalg import eigs

    grid = rate.grid
    m = csc_matrix(build_step_matrix(rate))
    sigma = math.exp(rate.growth_exponent * grid.dt)
    vals, vecs = eigs(m, k=1, sigma=sigma)
    vec = vecs[:, 0]
    pivot = vec[np.argmax(np.abs(vec))]
    vec = (vec / pivot).real
    if np.min(vec[1:]) < -1e-10 * np.max(vec):
        raise ConvergenceError("matrix eigenvector is not positive")
    return np.maximum(vec, 0.0), 0
