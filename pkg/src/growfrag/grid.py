"""Geometric size grid with exact doubling, plus state containers and profiles.

The mesh places ``n`` points per octave, ``x_k = 2**((k - N)/n)`` for
``k = 0..2N``, so that doubling or halving a size lands exactly on another
grid point.  Every non-dissipative property of the solver rests on that
exactness, which is why the points are computed by exponentiating the
exponent ``(k - N)/n`` instead of multiplying ``1 + dx`` repeatedly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

LN2 = math.log(2.0)

__all__ = [
    "LN2",
    "GeometricGrid",
    "StateVector",
    "Profile",
    "smooth_profile",
    "peak_profile",
    "custom_profile",
    "sample_initial",
]


@dataclass(frozen=True)
class GeometricGrid:
    """Geometric mesh on which size doubling is an index shift by ``n``.

    Parameters
    ----------
    n : int
        Points per octave (subdivisions per doubling), ``n >= 1``.
    N : int
        Half extent in grid indices; the mesh covers ``[2**(-N/n), 2**(N/n)]``
        with ``2N + 1`` points.

    Attributes
    ----------
    points : ndarray
        Grid sizes ``x_k = 2**((k - N)/n)``.
    dx : float
        Relative spacing ``2**(1/n) - 1``, so ``x_k = (1 + dx) x_{k-1}``.
    dt : float
        Time step ``dx / (1 + dx)``; the exact-CFL choice under which the
        upwind transport update reduces to a pure index shift.
    dy : float
        Log-spacing ``log(2)/n``; the duration of the exact transport flow
        that moves one grid point to the next.
    widths : ndarray
        Quadrature cell widths ``x_k - x_{k-1}`` for ``k = 1..2N``.
    """

    n: int
    N: int
    points: np.ndarray = field(init=False, repr=False, compare=False)
    widths: np.ndarray = field(init=False, repr=False, compare=False)
    dx: float = field(init=False, compare=False)
    dt: float = field(init=False, compare=False)
    dy: float = field(init=False, compare=False)

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValueError("n must be a positive integer")
        if self.N < 1:
            raise ValueError("N must be a positive integer")
        k = np.arange(2 * self.N + 1)
        points = np.exp2((k - self.N) / self.n)
        widths = np.diff(points)
        points.setflags(write=False)
        widths.setflags(write=False)
        dx = float(np.exp2(1.0 / self.n)) - 1.0
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "widths", widths)
        object.__setattr__(self, "dx", dx)
        object.__setattr__(self, "dt", dx / (1.0 + dx))
        object.__setattr__(self, "dy", LN2 / self.n)

    @property
    def size(self) -> int:
        return 2 * self.N + 1

    @property
    def x_min(self) -> float:
        return float(self.points[0])

    @property
    def x_max(self) -> float:
        return float(self.points[-1])

    def octave_class(self) -> np.ndarray:
        """Index residues ``(k - N) mod n``; constant along dyadic orbits."""
        return (np.arange(self.size) - self.N) % self.n

    def quadrature(self, values: np.ndarray):
        """Right-rectangle rule ``sum_{k>=1} values[k] * (x_k - x_{k-1})``.

        Linear in ``values``; the result dtype follows the input.
        """
        values = np.asarray(values)
        if values.shape != (self.size,):
            raise ValueError(f"expected {self.size} values, got {values.shape}")
        return np.sum(values[1:] * self.widths)

    def first_moment(self, values: np.ndarray):
        """Quadrature of ``x * values`` (size-weighted total)."""
        return self.quadrature(self.points * np.asarray(values))

    def index_near(self, x: float) -> int:
        """Index of the grid point closest to ``x`` in log scale."""
        if x <= 0:
            raise ValueError("sizes are positive")
        j = round(self.n * math.log2(x)) + self.N
        return min(max(j, 0), self.size - 1)

    def to_metadata(self) -> dict:
        return {
            "n": self.n,
            "N": self.N,
            "dx": self.dx,
            "dt": self.dt,
            "x_min": self.x_min,
            "x_max": self.x_max,
        }


@dataclass(frozen=True)
class StateVector:
    """Grid function ``u(t, x_k)`` tagged with its simulation time.

    ``steps`` counts scheme steps taken since the initial condition; it is
    ``None`` for states not produced by the stepper (spectral evaluations).
    Treat instances as values: operations return new states.
    """

    values: np.ndarray
    time: float
    grid: GeometricGrid
    steps: int | None = 0

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=complex)
        if values.shape != (self.grid.size,):
            raise ValueError(
                f"state length {values.shape} does not match grid size {self.grid.size}"
            )
        if self.time < 0:
            raise ValueError("time must be nonnegative")
        object.__setattr__(self, "values", values)

    def check_finite(self) -> None:
        if not np.isfinite(self.values).all():
            raise ValueError("state contains non-finite entries")

    def first_moment(self):
        return self.grid.first_moment(self.values)

    def is_real(self, tol: float = 0.0) -> bool:
        return bool(np.max(np.abs(self.values.imag)) <= tol)


@dataclass(frozen=True)
class Profile:
    """Initial-condition recipe.

    ``kind`` is one of ``smooth``, ``peak`` or ``custom``.  ``evaluator``
    maps positive sizes to (complex) values and must be vectorized; for the
    ``peak`` kind it describes the equivalent hat function, while sampling
    places the hat on the single grid cell nearest ``location`` and rescales
    it to unit first moment.
    """

    kind: str
    evaluator: Callable[[np.ndarray], np.ndarray]
    location: float = 2.0


def smooth_profile() -> Profile:
    """Smooth bump ``x**2 * exp(-x**2 / 2)``."""
    return Profile(kind="smooth", evaluator=lambda x: x**2 * np.exp(-(x**2) / 2.0))


def peak_profile(location: float = 2.0) -> Profile:
    """Near-point mass: a single-cell indicator at ``location``.

    The evaluator is only a placeholder hat of vanishing width; sampling
    defines the actual grid realization.
    """
    if location <= 0:
        raise ValueError("peak location must be positive")

    def hat(x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.where(x == location, 1.0, 0.0)

    return Profile(kind="peak", evaluator=hat, location=location)


def custom_profile(evaluator: Callable[[np.ndarray], np.ndarray]) -> Profile:
    return Profile(kind="custom", evaluator=evaluator)


def sample_initial(profile: Profile, grid: GeometricGrid) -> StateVector:
    """Sample a profile on the grid at time zero.

    Smooth and custom profiles are evaluated pointwise.  The peak profile
    becomes an indicator of the single cell nearest its location, scaled so
    the quadrature first moment is exactly one.
    """
    if profile.kind == "peak":
        j = grid.index_near(profile.location)
        j = max(j, 1)  # cell 0 carries no quadrature weight
        values = np.zeros(grid.size, dtype=complex)
        values[j] = 1.0 / (grid.points[j] * grid.widths[j - 1])
        return StateVector(values=values, time=0.0, grid=grid, steps=0)
    values = np.asarray(profile.evaluator(grid.points), dtype=complex)
    if values.shape != (grid.size,):
        raise ValueError("profile evaluator must be vectorized over the grid")
    if not np.isfinite(values).all():
        raise ValueError("profile evaluates to non-finite values on the grid")
    return StateVector(values=values, time=0.0, grid=grid, steps=0)
