"""Splitting stepper: transport, fragmentation, composed runs, diffusive variant."""

from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from growfrag import (
    BlowupError,
    DivisionRate,
    GeometricGrid,
    StabilityError,
    StateVector,
    diffusive_reference_run,
    diffusive_transport_step,
    fragmentation_step,
    oscillation_metrics,
    peak_profile,
    run,
    sample_initial,
    smooth_profile,
    step,
    transport_step,
)
from growfrag.grid import LN2

EPS = np.finfo(float).eps


def small_grid(n=8, N=24) -> GeometricGrid:
    return GeometricGrid(n=n, N=N)


def zero_rate(grid) -> DivisionRate:
    return DivisionRate(grid=grid, samples=np.zeros(grid.size))


def state_from(grid, values, time=0.0, steps=0) -> StateVector:
    return StateVector(values=np.asarray(values, dtype=complex), time=time, grid=grid, steps=steps)


# ---------------------------------------------------------------- rates


def test_rate_rejects_negative_and_non_finite():
    grid = small_grid()
    with pytest.raises(ValueError):
        DivisionRate(grid=grid, samples=-np.ones(grid.size))
    bad = np.ones(grid.size)
    bad[3] = np.nan
    with pytest.raises(ValueError):
        DivisionRate(grid=grid, samples=bad)


def test_rate_growth_bounds_checked_when_supplied():
    grid = small_grid()
    DivisionRate(
        grid=grid,
        samples=grid.points**2,
        hyp_params=(2.0, 2.0, 1.0, 1.0, 0.0),
    )
    with pytest.raises(ValueError):
        DivisionRate(
            grid=grid,
            samples=grid.points**2,
            hyp_params=(2.0, 2.0, 2.0, 3.0, 0.0),  # lower envelope above samples
        )


def test_rate_from_table_interpolates_in_log_size():
    grid = small_grid()
    sizes = np.array([grid.x_min / 2, 1.0, grid.x_max * 2])
    rate = DivisionRate.from_table(grid, sizes, [1.0, 1.0, 1.0])
    assert np.allclose(rate.samples, 1.0)


def test_stability_certificate():
    grid = GeometricGrid(n=32, N=256)
    rate = DivisionRate.from_power_law(grid, 1.0, 2.0)
    assert not rate.is_stable
    with pytest.raises(StabilityError):
        rate.require_stable()
    capped = DivisionRate.from_power_law(GeometricGrid(n=32, N=88), 1.0, 2.0)
    assert capped.is_stable


# ------------------------------------------------------------ transport


def test_transport_zero_state():
    grid = small_grid()
    out = transport_step(state_from(grid, np.zeros(grid.size)))
    assert np.all(out.values == 0)
    assert out.time == 0.0


def test_transport_single_spike_is_shift():
    grid = small_grid()
    u = np.zeros(grid.size)
    u[5] = 1.0
    out = transport_step(state_from(grid, u))
    expected = np.zeros(grid.size)
    expected[6] = 1.0 / (1.0 + grid.dx)
    assert np.array_equal(out.values.real, expected)


def test_transport_two_spikes_shift_together():
    grid = small_grid()
    u = np.zeros(grid.size)
    u[5] = 1.0
    u[6] = 2.0
    out = transport_step(state_from(grid, u))
    scale = 1.0 / (1.0 + grid.dx)
    assert out.values[6] == pytest.approx(scale)
    assert out.values[7] == pytest.approx(2 * scale)
    assert np.count_nonzero(out.values) == 2


def test_transport_matches_difference_form():
    # with exact CFL the difference form collapses to the shift; rounding in
    # the x_k u_k cancellation keeps the agreement at the 1e-13 level
    grid = GeometricGrid(n=32, N=256)
    rng = np.random.default_rng(42)
    u = rng.standard_normal(grid.size) + 1j * rng.standard_normal(grid.size)
    out = transport_step(state_from(grid, u)).values
    x, w = grid.points, grid.widths
    diff = u.copy()
    diff[1:] = u[1:] - (grid.dt / w) * (x[1:] * u[1:] - x[:-1] * u[:-1])
    diff[0] = 0.0
    assert np.max(np.abs(out - diff)) <= 1e-12 * np.max(np.abs(out))


# -------------------------------------------------------- fragmentation


def test_fragmentation_without_division_is_identity():
    grid = small_grid()
    rng = np.random.default_rng(0)
    u = rng.standard_normal(grid.size)
    out = fragmentation_step(state_from(grid, u), zero_rate(grid))
    assert np.array_equal(out.values.real, u)
    assert out.time == pytest.approx(grid.dt)
    assert out.steps == 1


def test_fragmentation_spike_at_unit_loss():
    grid = small_grid()
    j = 12
    samples = np.zeros(grid.size)
    samples[j] = 1.0 / grid.dt  # loss factor exactly one
    rate = DivisionRate(grid=grid, samples=samples)
    u = np.zeros(grid.size)
    u[j] = 1.0
    out = fragmentation_step(state_from(grid, u), rate)
    assert out.values[j] == 0.0
    gain = 4.0 * grid.dt * samples[j] * u[j]
    assert out.values[j - grid.n] == pytest.approx(gain)


def test_fragmentation_conserves_mass_and_number_on_interior(grid32):
    # standard kernel: two daughters of half size carry the mother's mass;
    # conservative kernel: one daughter per mother keeps the count
    grid = grid32
    rng = np.random.default_rng(7)
    u = np.zeros(grid.size, dtype=complex)
    inner = slice(grid.n + 1, grid.size - grid.n - 1)
    u[inner] = rng.random(grid.size - 2 * grid.n - 2) + 1j * rng.random(
        grid.size - 2 * grid.n - 2
    )
    st_ = state_from(grid, u)
    std = fragmentation_step(st_, DivisionRate.from_power_law(grid, 1.0, 2.0))
    mass0, mass1 = grid.first_moment(u), grid.first_moment(std.values)
    assert abs(mass1 - mass0) <= 1e-12 * abs(mass0)
    cons = fragmentation_step(
        st_, DivisionRate.from_power_law(grid, 1.0, 2.0, mode="conservative")
    )
    num0, num1 = grid.quadrature(u), grid.quadrature(cons.values)
    assert abs(num1 - num0) <= 1e-12 * abs(num0)


def test_fragmentation_requires_stability():
    grid = GeometricGrid(n=32, N=256)
    rate = DivisionRate.from_power_law(grid, 1.0, 2.0)
    state = sample_initial(peak_profile(2.0), grid)
    with pytest.raises(StabilityError):
        fragmentation_step(state, rate)


# ----------------------------------------------------------- full step


def test_step_without_division_is_pure_shift():
    grid = small_grid()
    u = np.zeros(grid.size)
    u[5] = 1.0
    out = step(state_from(grid, u), zero_rate(grid))
    assert out.values[6] == pytest.approx(1.0 / (1.0 + grid.dx))
    assert np.count_nonzero(out.values) == 1


def test_step_zero_state_stays_zero(grid32, rate32):
    out = step(state_from(grid32, np.zeros(grid32.size)), rate32)
    assert np.all(out.values == 0)


def test_step_from_peak_creates_daughter_cell(grid32, rate32):
    state = sample_initial(peak_profile(2.0), grid32)
    j = int(np.nonzero(state.values)[0][0])
    out = step(state, rate32)
    nz = set(np.nonzero(np.abs(out.values))[0].tolist())
    assert nz == {j + 1, j + 1 - grid32.n}


@settings(max_examples=20, deadline=None)
@given(
    a=st.complex_numbers(max_magnitude=5, allow_nan=False, allow_infinity=False),
    b=st.complex_numbers(max_magnitude=5, allow_nan=False, allow_infinity=False),
)
def test_step_is_linear(a, b):
    grid = small_grid()
    rate = DivisionRate.from_power_law(grid, 0.05, 1.0)
    rng = np.random.default_rng(3)
    u = rng.standard_normal(grid.size) + 1j * rng.standard_normal(grid.size)
    v = rng.standard_normal(grid.size) - 1j * rng.standard_normal(grid.size)
    lhs = step(state_from(grid, a * u + b * v), rate).values
    rhs = a * step(state_from(grid, u), rate).values + b * step(
        state_from(grid, v), rate
    ).values
    scale = np.max(np.abs(lhs)) + 1.0
    assert np.max(np.abs(lhs - rhs)) <= 1e-12 * scale


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(min_value=0, max_value=2**31))
def test_step_preserves_positivity(seed):
    grid = small_grid()
    rate = DivisionRate.from_power_law(grid, 0.05, 1.0)
    rng = np.random.default_rng(seed)
    u = rng.random(grid.size)
    out = step(state_from(grid, u), rate)
    assert np.all(out.values.real >= 0)
    assert np.all(out.values.imag == 0)


def test_real_states_stay_real(grid32, rate32):
    state = sample_initial(smooth_profile(), grid32)
    for _ in range(5):
        state = step(state, rate32)
    assert state.is_real(tol=0.0)


# ----------------------------------------------------------------- runs


def test_run_zero_horizon_keeps_only_initial(grid32, rate32):
    state = sample_initial(peak_profile(2.0), grid32)
    traj = run(state, rate32, 0.0)
    assert traj.meta["n_steps"] == 0
    assert len(traj.snapshot_steps) == 1
    assert np.array_equal(traj.snapshots[0], state.values)


def test_run_peak_oscillates_with_cycle_near_log2(grid32, rate32):
    state = sample_initial(peak_profile(2.0), grid32)
    traj = run(state, rate32, 12 * LN2, snapshot_every=1)
    metrics = oscillation_metrics(traj.series["t"], traj.series["max_rescaled"])
    assert abs(metrics.period - LN2) / LN2 < 0.02
    assert traj.series["mass_leak"][-1] < 5e-3


def test_run_smooth_oscillation_much_smaller_than_peak(grid32, rate32):
    peak = sample_initial(peak_profile(2.0), grid32)
    smooth = sample_initial(smooth_profile(), grid32)
    tp = run(peak, rate32, 8 * LN2, snapshot_every=1)
    ts = run(smooth, rate32, 8 * LN2, snapshot_every=1)
    mp = oscillation_metrics(tp.series["t"], tp.series["max_rescaled"])
    half = len(ts.series["t"]) // 2
    late = ts.series["max_rescaled"][half:]
    smooth_amp = np.max(late) - np.min(late)
    assert smooth_amp < 0.05 * np.mean(mp.amplitudes)


def test_run_aborts_on_overflow(grid32, rate32):
    u = np.full(grid32.size, 1e308)
    state = state_from(grid32, u)
    with pytest.raises(BlowupError) as err:
        run(state, rate32, 5 * LN2)
    assert err.value.step >= 1


# ----------------------------------------------------- diffusive variant


def test_diffusive_rejects_unit_cfl(grid32, rate32):
    state = sample_initial(peak_profile(2.0), grid32)
    with pytest.raises(ValueError):
        diffusive_reference_run(state, rate32, 1.0, LN2)
    with pytest.raises(ValueError):
        diffusive_transport_step(state, 0.0)


def test_diffusive_spike_spreads():
    grid = GeometricGrid(n=32, N=88)
    u = np.zeros(grid.size)
    u[grid.size // 2] = 1.0
    state = state_from(grid, u)
    f = 0.9
    for _ in range(math.ceil(1.0 / (f * grid.dt))):
        state = diffusive_transport_step(state, f)
    occupied = np.sum(np.abs(state.values) > 1e-12 * np.max(np.abs(state.values)))
    assert occupied >= 3


def test_diffusive_run_damps_oscillation(grid64, rate64):
    state = sample_initial(peak_profile(2.0), grid64)
    traj = diffusive_reference_run(state, rate64, 0.9, 10 * LN2, snapshot_every=1)
    metrics = oscillation_metrics(traj.series["t"], traj.series["max_rescaled"])
    assert metrics.amplitude_slope < -0.02
