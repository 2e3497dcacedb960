"""Shared fixtures: stability-capped grids and solved stationary profiles."""

from __future__ import annotations

import pytest

from growfrag import (
    DivisionRate,
    GeometricGrid,
    max_stable_half_extent,
    perron_profile,
)


def capped_grid(n: int, coeff: float = 1.0, exponent: float = 2.0) -> GeometricGrid:
    cap = max_stable_half_extent(n, coeff, exponent)
    return GeometricGrid(n=n, N=min(8 * n, cap) if cap else 8 * n)


@pytest.fixture(scope="session")
def grid32() -> GeometricGrid:
    return capped_grid(32)


@pytest.fixture(scope="session")
def grid64() -> GeometricGrid:
    return capped_grid(64)


@pytest.fixture(scope="session")
def rate32(grid32) -> DivisionRate:
    return DivisionRate.from_power_law(grid32, 1.0, 2.0)


@pytest.fixture(scope="session")
def rate64(grid64) -> DivisionRate:
    return DivisionRate.from_power_law(grid64, 1.0, 2.0)


@pytest.fixture(scope="session")
def perron32(rate32):
    return perron_profile(rate32)


@pytest.fixture(scope="session")
def perron64(rate64):
    return perron_profile(rate64)


@pytest.fixture(scope="session")
def rate32_conservative(grid32) -> DivisionRate:
    return DivisionRate.from_power_law(grid32, 1.0, 2.0, mode="conservative")


@pytest.fixture(scope="session")
def perron32_conservative(rate32_conservative):
    return perron_profile(rate32_conservative)
