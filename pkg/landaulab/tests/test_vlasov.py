# -*- coding: utf-8 -*-
import numpy as np
import pytest

from landaulab import equilibria, vlasov, volterra
from landaulab.errors import AlignmentError, NumericalFailure, ResolutionAlarm
from landaulab.gevrey import GevreySchedule, sobolev_norm
from landaulab.grid import PhaseGrid
from landaulab.volterra import GaussianPerturbation, fit_decay_rate

SCHEDULE = GevreySchedule(0.45, 1.0, 0.5)


def _setup(grid, W, eps, horizon, **kwargs):
    data = GaussianPerturbation({1: eps})
    return vlasov.SimulationSetup(grid, equilibria.make_maxwellian(), W, SCHEDULE, data.real_space(grid),
                                  horizon, **kwargs)


@pytest.fixture(scope='module')
def landau():
    grid = PhaseGrid(32, 1024, 8.0)
    setup = _setup(grid, equilibria.coulomb(4.0), 1e-3, 60.0, dt=grid.deta / 4)
    return vlasov.run_simulation(setup)


def test_compute_field():
    W = equilibria.coulomb(4.0)
    field = vlasov.compute_field([0, 1, 2], [1.0, 0.5, 0.25], W)
    assert np.allclose(field, [0.0, -2j, -0.5j])


def test_free_transport_is_exact():
    grid = PhaseGrid(32, 512, 8.0)
    eps = 1e-3
    trajectory = vlasov.run_simulation(_setup(grid, equilibria.free_transport(), eps, 20.0))
    rho = trajectory.rho[:, grid.mode_index(1)]
    exact = 0.5 * eps * np.exp(-0.5 * trajectory.times ** 2)
    assert np.max(np.abs(rho - exact)) <= 1e-6 * 0.5 * eps
    assert trajectory.times[-1] == pytest.approx(20.0, abs=grid.deta)
    assert trajectory.metadata['mass_drift'] < 1e-12
    assert trajectory.metadata['validity_horizon'] == pytest.approx(grid.eta_max)


def test_time_reversal():
    grid = PhaseGrid(16, 128, 8.0)
    eq, W = equilibria.make_maxwellian(), equilibria.coulomb(4.0)
    start = vlasov.SimState(grid, 0.0, GaussianPerturbation({1: 1e-2, 2: 5e-3}).real_space(grid))
    state = start
    for _ in range(20):
        state = vlasov.step_strang(state, 0.1, eq, W)
    assert np.max(np.abs(state.h - start.h)) > 1e-6
    for _ in range(20):
        state = vlasov.step_strang(state, -0.1, eq, W)
    assert np.max(np.abs(state.h - start.h)) <= 1e-10 * np.max(np.abs(start.h))
    assert state.t == pytest.approx(0.0, abs=1e-12)


def test_sobolev_growth_band():
    grid = PhaseGrid(32, 512, 8.0)
    eq, W = equilibria.make_maxwellian(), equilibria.free_transport()
    state = vlasov.SimState(grid, 0.0, GaussianPerturbation({1: 1e-3}).real_space(grid))
    reference = state.spectrum.l2_norm()
    for n in range(1, 41):
        state = vlasov.step_strang(state, 0.5, eq, W)
        if n * 0.5 in (5.0, 10.0, 20.0):
            t = n * 0.5
            ratio = sobolev_norm(state.spectrum, 2.0) / (reference * (1 + t ** 2))
            assert 1.0 <= ratio <= 2.0, t


def test_landau_bootstrap_decays(landau):
    times, a_rho = landau.times, landau.a_rho
    window = (times >= 5.0) & (times <= 50.0)
    inner = np.nonzero(window)[0]
    peaks = [i for i in inner if a_rho[i] > a_rho[i - 1] and a_rho[i] >= a_rho[i + 1]]
    assert len(peaks) >= 3
    assert np.all(np.diff(a_rho[peaks]) < 0)
    rows = landau.bootstrap
    q3 = [row.q3 for row in rows]
    assert np.all(np.diff(q3) >= 0)
    last_quarter = q3[-1] - q3[(3 * len(q3)) // 4]
    assert last_quarter <= 0.01 * q3[-1]


def test_landau_matches_linear_rate(landau):
    fit = fit_decay_rate(landau.times, landau.rho[:, landau.grid.mode_index(1)], 10.0, 40.0)
    assert fit.rate == pytest.approx(-0.3067, rel=0.05)


def test_asymptotic_profile(landau):
    profile = vlasov.asymptotic_profile(landau, SCHEDULE.lambda_prime, SCHEDULE.s)
    assert profile.h_inf.frame.kind == 'gliding'
    assert len(profile.distances) >= 2
    assert profile.distances[-1][1] < profile.distances[0][1]
    assert profile.rate > 0


def _final_profile(grid, eps, horizon, linearized):
    setup = _setup(grid, equilibria.coulomb(4.0), eps, horizon, dt=grid.deta / 4, linearized=linearized)
    return vlasov.asymptotic_profile(vlasov.run_simulation(setup), SCHEDULE.lambda_prime, SCHEDULE.s)


@pytest.fixture(scope='module')
def profile_grid():
    return PhaseGrid(16, 512, 8.0)


def test_linearized_profile_matches_volterra(profile_grid):
    grid = profile_grid
    horizon = 48 * grid.deta
    data = GaussianPerturbation({1: 1e-3})
    profile = _final_profile(grid, 1e-3, horizon, linearized=True)
    final = volterra.linear_final_state(data, equilibria.make_maxwellian(), equilibria.coulomb(4.0), horizon, grid)
    assert profile.h_inf.frame.t == pytest.approx(final.spectrum.frame.t)
    base = data.spectrum(grid).coeffs
    simulated = profile.h_inf.coeffs - base
    predicted = final.spectrum.coeffs - base
    assert np.linalg.norm(predicted) > 0.01 * np.linalg.norm(base)
    assert np.linalg.norm(simulated - predicted) <= 0.05 * np.linalg.norm(predicted)


def test_profile_gap_is_quadratic(profile_grid):
    grid = profile_grid
    horizon = 48 * grid.deta

    def gap(eps):
        full = _final_profile(grid, eps, horizon, linearized=False)
        linear = _final_profile(grid, eps, horizon, linearized=True)
        return np.linalg.norm(full.h_inf.coeffs - linear.h_inf.coeffs)

    ratio = gap(2e-3) / gap(1e-3)
    assert 3.0 <= ratio <= 5.0


def test_nonlinear_gap_is_quadratic():
    grid = PhaseGrid(16, 256, 8.0)
    W = equilibria.coulomb(4.0)

    def gap(eps):
        full = vlasov.run_simulation(_setup(grid, W, eps, 20.0, diagnostics=False))
        linear = vlasov.run_simulation(_setup(grid, W, eps, 20.0, diagnostics=False, linearized=True))
        return np.max(np.abs(full.rho - linear.rho))

    ratio = gap(1e-3) / gap(5e-4)
    assert 3.0 <= ratio <= 5.0


def test_snapshots_on_diagnostic_times():
    grid = PhaseGrid(16, 128, 8.0)
    trajectory = vlasov.run_simulation(_setup(grid, equilibria.coulomb(4.0), 1e-3, 4.0, snapshot_every=4))
    times = [t for t, _ in trajectory.snapshots]
    assert times == pytest.approx([0.0, 4 * grid.deta, 8 * grid.deta])
    assert all(spec.frame.kind == 'lab' for _, spec in trajectory.snapshots)
    assert len(trajectory.bootstrap) == len(trajectory.times)


def test_boundary_alarm_keeps_state():
    grid = PhaseGrid(16, 64, 8.0)
    with pytest.raises(ResolutionAlarm) as err:
        vlasov.run_simulation(_setup(grid, equilibria.free_transport(), 1e-2, 12.0))
    assert err.value.state is not None
    assert err.value.state.t < 12.0


def test_non_finite_state():
    grid = PhaseGrid(16, 64, 8.0)
    setup = vlasov.SimulationSetup(grid, equilibria.make_maxwellian(), equilibria.coulomb(), SCHEDULE,
                                   np.full(grid.shape, np.nan), 1.0, diagnostics=False)
    with pytest.raises(NumericalFailure):
        vlasov.run_simulation(setup)


def test_misaligned_steps():
    grid = PhaseGrid(16, 64, 8.0)
    with pytest.raises(AlignmentError):
        vlasov.run_simulation(_setup(grid, equilibria.coulomb(), 1e-3, 1.0, dt=0.3))
    with pytest.raises(AlignmentError):
        vlasov.run_simulation(_setup(grid, equilibria.coulomb(), 1e-3, 1.0, dt=0.1, diagnostics=False,
                                     kicks=(vlasov.Kick(0.25, 2, 1e-3),)))


def test_boundary_fraction():
    grid = PhaseGrid(16, 64, 8.0)
    spec = GaussianPerturbation({1: 1.0}).spectrum(grid)
    assert vlasov.boundary_fraction(spec) < 1e-12
    spec.coeffs[:, 0] = 1.0
    assert vlasov.boundary_fraction(spec) > 0.01
