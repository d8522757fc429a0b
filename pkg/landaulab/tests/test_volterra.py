# -*- coding: utf-8 -*-
import numpy as np
import pytest

from landaulab import equilibria, volterra
from landaulab.errors import AlignmentError, GridError, InstabilityError, ParameterError
from landaulab.gevrey import GevreySchedule
from landaulab.grid import FieldSpectrum, PhaseGrid


def test_constant_kernel():
    problem = volterra.VolterraProblem.sample(lambda t: -0.5, lambda t: 1.0, 4.0, 0.01)
    phi = volterra.solve_volterra(problem)
    assert np.max(np.abs(phi - np.exp(-0.5 * problem.times))) < 1e-4


def test_zero_kernel_returns_forcing():
    forcing = np.exp(1j * np.linspace(0, 3, 31))
    problem = volterra.VolterraProblem(np.zeros(31, dtype=complex), forcing, 0.1)
    assert np.array_equal(volterra.solve_volterra(problem), forcing)


def test_mismatched_samples():
    with pytest.raises(GridError):
        volterra.VolterraProblem(np.zeros(4, dtype=complex), np.zeros(5, dtype=complex), 0.1)
    with pytest.raises(ParameterError):
        volterra.VolterraProblem(np.zeros(4, dtype=complex), np.zeros(4, dtype=complex), 0.0)


def test_second_order_convergence():
    p = volterra.richardson_exponent(lambda t: -0.5 * np.cos(t), lambda t: np.exp(-0.1 * t), 10.0, 0.1)
    assert 1.8 < p < 2.3


def test_landau_decay_rate():
    data = volterra.GaussianPerturbation({1: 1e-3})
    trace = volterra.linear_density(data, equilibria.make_maxwellian(), equilibria.coulomb(4.0), 40.0, 0.05)
    fit = volterra.fit_decay_rate(trace.times, trace.mode(1), 10.0, 40.0)
    assert fit.rate == pytest.approx(-0.3067, rel=0.05)
    assert fit.frequency == pytest.approx(2.8312, rel=0.05)
    assert np.allclose(trace.mode(-1), trace.mode(1))


def test_parallel_matches_serial():
    data = volterra.GaussianPerturbation({1: 1e-3, 2: 5e-4})
    args = (data, equilibria.make_maxwellian(), equilibria.coulomb(4.0), 10.0, 0.1)
    serial = volterra.linear_density(*args, threads=1)
    threaded = volterra.linear_density(*args, threads=3)
    assert np.array_equal(serial.values, threaded.values)


def test_free_transport_ratio_is_one():
    data = volterra.GaussianPerturbation({1: 1e-2, 3: 1e-3})
    trace = volterra.linear_density(data, equilibria.make_maxwellian(), equilibria.free_transport(), 10.0, 0.1)
    forcing = volterra.forcing_trace(data, 10.0, 0.1)
    assert np.array_equal(trace.values, forcing.values)
    schedule = GevreySchedule(0.45, 1.0, 0.5)
    assert volterra.estimate_weighted_ratio(trace, forcing, schedule) == 1.0


def test_forcing_is_free_transport():
    data = volterra.GaussianPerturbation({2: 0.2}, theta=0.5)
    forcing = volterra.forcing_trace(data, 2.0, 0.5)
    assert list(forcing.modes) == [-2, 2]
    assert np.allclose(forcing.mode(2), 0.1 * np.exp(-0.25 * (2 * forcing.times) ** 2))


def test_lattice_forcing_horizon():
    grid = PhaseGrid(16, 64, 8.0)
    spec = volterra.GaussianPerturbation({1: 1.0, 2: 0.5}).spectrum(grid)
    forcing = volterra.forcing_trace(spec, 20.0, grid.deta)
    assert forcing.horizon(1) == pytest.approx(grid.eta_max)
    assert forcing.horizon(2) == pytest.approx(grid.eta_max / 2)
    late = forcing.times >= grid.eta_max - 1e-9
    assert not np.any(forcing.mode(1)[late])
    assert forcing.mode(1)[0] == pytest.approx(0.5)


def test_lattice_forcing_between_lattice_points():
    grid = PhaseGrid(16, 64, 8.0)
    data = volterra.GaussianPerturbation({1: 1.0, 2: 0.5})
    forcing = volterra.forcing_trace(data.spectrum(grid), 8.0, 0.1)
    exact = volterra.forcing_trace(data, 8.0, 0.1)
    assert np.allclose(forcing.values, exact.values, atol=1e-12)
    assert forcing.horizon(1) == np.inf
    assert forcing.horizon(2) == pytest.approx(grid.eta_max / 2)
    late = forcing.times >= grid.eta_max / 2
    assert not np.any(forcing.mode(2)[late])


def test_trace_validation():
    with pytest.raises(ParameterError):
        volterra.DensityTrace(np.array([0, 1]), np.arange(3.0), np.zeros((2, 3)))
    with pytest.raises(GridError):
        volterra.DensityTrace(np.array([1]), np.array([0.0, 1.0, 3.0]), np.zeros((1, 3)))
    trace = volterra.DensityTrace(np.array([1]), np.arange(3.0), np.zeros((1, 3)))
    with pytest.raises(KeyError):
        trace.mode(2)
    assert trace.horizon(1) == np.inf


def test_fit_needs_samples():
    with pytest.raises(ParameterError):
        volterra.fit_decay_rate(np.arange(10.0), np.zeros(10), 2.0, 8.0)


def test_fit_complex_exponential():
    t = np.linspace(0, 10, 201)
    fit = volterra.fit_decay_rate(t, np.exp((-0.2 + 1.5j) * t), 1.0, 9.0)
    assert fit.rate == pytest.approx(-0.2)
    assert fit.frequency == pytest.approx(1.5)


def test_final_state_free_transport():
    grid = PhaseGrid(16, 128, 8.0)
    data = volterra.GaussianPerturbation({1: 1e-3})
    final = volterra.linear_final_state(data, equilibria.make_maxwellian(), equilibria.free_transport(), 3.0, grid)
    assert final.spectrum.frame.kind == 'gliding'
    assert grid.is_aligned(final.spectrum.frame.t)
    assert final.spectrum.frame.t >= 3.0
    assert np.array_equal(final.spectrum.coeffs, data.spectrum(grid).coeffs)
    assert final.tail_bound == 0.0


def test_final_state_landau():
    grid = PhaseGrid(16, 512, 8.0)
    data = volterra.GaussianPerturbation({1: 1e-3})
    final = volterra.linear_final_state(data, equilibria.make_maxwellian(), equilibria.coulomb(4.0), 40.0, grid)
    assert grid.is_aligned(final.spectrum.frame.t)
    assert 0 < final.tail_bound < 1e-4
    assert np.all(np.isfinite(final.spectrum.coeffs))
    assert final.spectrum.reality_defect() < 1e-10


def test_final_state_from_lattice_data():
    grid = PhaseGrid(16, 128, 8.0)
    data = volterra.GaussianPerturbation({1: 1e-3})
    args = (equilibria.make_maxwellian(), equilibria.coulomb(4.0), 10.0)
    lattice = volterra.linear_final_state(data.spectrum(grid), *args)
    analytic = volterra.linear_final_state(data, *args, grid=grid)
    assert lattice.trace.dt == pytest.approx(grid.deta / 4)
    assert lattice.spectrum.frame == analytic.spectrum.frame
    assert np.allclose(lattice.trace.values, analytic.trace.values, rtol=0, atol=1e-13)
    assert np.allclose(lattice.spectrum.coeffs, analytic.spectrum.coeffs, rtol=0, atol=1e-13)


def test_final_state_needs_decay():
    grid = PhaseGrid(16, 128, 8.0)
    data = volterra.GaussianPerturbation({1: 1e-3})
    with pytest.raises(InstabilityError):
        volterra.linear_final_state(data, equilibria.make_maxwellian(), equilibria.newton(4.0), 10.0, grid)
    with pytest.raises(AlignmentError):
        volterra.linear_final_state(data, equilibria.make_maxwellian(), equilibria.coulomb(4.0), 10.0, grid,
                                    dt=0.3)
    with pytest.raises(ParameterError):
        volterra.linear_final_state(data, equilibria.make_maxwellian(), equilibria.coulomb(4.0), 10.0)


def test_density_is_linear_in_data():
    grid = PhaseGrid(16, 128, 8.0)
    first = volterra.GaussianPerturbation({1: 1e-3}).spectrum(grid)
    second = volterra.GaussianPerturbation({1: 5e-4, 2: 2e-4}, theta=2.0).spectrum(grid)
    combined = FieldSpectrum(grid, 2.0 * first.coeffs - 3.0 * second.coeffs)
    args = (equilibria.make_maxwellian(), equilibria.coulomb(4.0), 8.0, 0.1)
    rho_first = volterra.linear_density(first, *args)
    rho_second = volterra.linear_density(second, *args)
    rho = volterra.linear_density(combined, *args)
    assert list(rho.modes) == list(rho_second.modes) == [-2, -1, 1, 2]
    expected = -3.0 * rho_second.values
    for k in (-1, 1):
        i = list(rho.modes).index(k)
        expected[i] += 2.0 * rho_first.mode(k)
    scale = np.max(np.abs(rho.values))
    assert np.max(np.abs(rho.values - expected)) <= 1e-12 * scale


def test_final_state_keeps_single_mode():
    grid = PhaseGrid(16, 128, 8.0)
    data = volterra.GaussianPerturbation({2: 1e-3})
    final = volterra.linear_final_state(data, equilibria.make_maxwellian(), equilibria.coulomb(4.0), 10.0, grid)
    rows = np.flatnonzero(np.any(final.spectrum.coeffs != 0, axis=1))
    assert list(rows) == [grid.mode_index(-2), grid.mode_index(2)]
    assert not np.array_equal(final.spectrum.coeffs, data.spectrum(grid).coeffs)
