"""
Nonlinear spectral solver for the perturbation h of a homogeneous background f0:

    d_t h + v d_x h + F d_v h + F d_v f0 = 0,   F_k = -i k W(k) rho_k.

Time stepping is Strang splitting X(dt/2) V(dt) X(dt/2) with exact
substeps: free streaming is a phase multiplication in x-Fourier space, the
field step shifts h + f0 in v by F(x) dt, with the background carried
analytically.  Gevrey and bootstrap diagnostics are taken in the gliding
frame at times that are multiples of deta.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np
import scipy.fft

from .equilibria import Equilibrium, Interaction
from .errors import AlignmentError, InstabilityError, NumericalFailure, ParameterError, ResolutionAlarm
from .gevrey import DEFAULT_LOG_CAP, GevreySchedule, density_norm, gevrey_norm_report, radius_norm
from .grid import FieldSpectrum, PhaseGrid, from_real_space, to_gliding
from .volterra import DensityTrace, fit_decay_rate

log = logging.getLogger(__name__)

FILTER_ORDER = 36
BOUNDARY_BAND = 1.0 / 16
GLIDING_SAMPLES = 16


@dataclass(frozen=True, eq=False)
class SimState:
    """Real samples h[x_n, v_j] of the perturbation at time t."""

    grid: PhaseGrid
    t: float
    h: np.ndarray
    step: int = 0

    @property
    def spectrum(self) -> FieldSpectrum:
        return from_real_space(self.grid, self.h)

    def density(self) -> np.ndarray:
        """rho_k for every grid mode, fftshift order."""
        rho_x = self.h.sum(axis=1) * self.grid.dv
        return scipy.fft.fftshift(scipy.fft.fft(rho_x)) / self.grid.Nx

    def mass(self) -> float:
        return float(self.h.sum() * self.grid.dx * self.grid.dv)

    def casimir(self, eq: Equilibrium) -> float:
        """L2 norm of h + f0 on the grid."""
        total = self.h + eq.profile(self.grid.v)[None, :]
        return float(np.sqrt(np.sum(total ** 2) * self.grid.dx * self.grid.dv))


def compute_field(modes, rho, W: Interaction) -> np.ndarray:
    """F_k = -i k W(k) rho_k."""
    modes = np.asarray(modes)
    return -1j * modes * W.multiplier(modes) * np.asarray(rho)


class Kick(NamedTuple):
    """Impulsive external field: at time t, h + f0 is shifted in v by amplitude cos(mode x)."""

    t: float
    mode: int
    amplitude: float


def _x_modes(grid: PhaseGrid) -> np.ndarray:
    return np.arange(grid.Nx // 2 + 1)


def _x_advect(h: np.ndarray, grid: PhaseGrid, tau: float, workers: int) -> np.ndarray:
    hk = scipy.fft.rfft(h, axis=0, workers=workers)
    hk *= np.exp(-1j * _x_modes(grid)[:, None] * grid.v[None, :] * tau)
    hk[-1] = 0.0
    return scipy.fft.irfft(hk, n=grid.Nx, axis=0, workers=workers)


def _field_samples(h: np.ndarray, grid: PhaseGrid, W: Interaction, workers: int) -> np.ndarray:
    rho_x = h.sum(axis=1) * grid.dv
    rho_k = scipy.fft.rfft(rho_x, workers=workers) / grid.Nx
    field_k = compute_field(_x_modes(grid), rho_k, W)
    field_k[0] = 0.0
    field_k[-1] = 0.0
    return scipy.fft.irfft(field_k * grid.Nx, n=grid.Nx, workers=workers)


def _filter_profile(grid: PhaseGrid, strength: float) -> np.ndarray:
    eta = 2 * np.pi * scipy.fft.rfftfreq(grid.Nv, grid.dv)
    return np.exp(-strength * (eta / grid.eta_max) ** FILTER_ORDER)


def _v_shift(h: np.ndarray, grid: PhaseGrid, shift: np.ndarray, workers: int,
             damping: np.ndarray | None = None) -> np.ndarray:
    """h(x, v - shift(x)) by a phase multiplication in eta."""
    eta = 2 * np.pi * scipy.fft.rfftfreq(grid.Nv, grid.dv)
    hv = scipy.fft.rfft(h, axis=1, workers=workers)
    hv *= np.exp(-1j * eta[None, :] * shift[:, None])
    if damping is not None:
        hv *= damping[None, :]
    hv[:, -1] = 0.0
    return scipy.fft.irfft(hv, n=grid.Nv, axis=1, workers=workers)


def _shift_with_background(h: np.ndarray, grid: PhaseGrid, eq: Equilibrium, shift: np.ndarray,
                           workers: int, damping: np.ndarray | None = None) -> np.ndarray:
    v = grid.v[None, :]
    return _v_shift(h, grid, shift, workers, damping) + eq.profile(v - shift[:, None]) - eq.profile(v)


def _remove_mean(h: np.ndarray, grid: PhaseGrid) -> np.ndarray:
    mean_density = h.sum(axis=1).mean() * grid.dv
    return h - mean_density / (2 * grid.V)


def step_strang(state: SimState, dt: float, eq: Equilibrium, W: Interaction, linearized: bool = False,
                filter_strength: float | None = None, threads: int = 1) -> SimState:
    """One Strang step X(dt/2) V(dt) X(dt/2).

    In linearized mode the field substep is the exact source h -= dt F f0'.
    Negative dt steps backwards.
    """
    grid = state.grid
    h = _x_advect(state.h, grid, 0.5 * dt, threads)
    field_x = _field_samples(h, grid, W, threads)
    damping = None if not filter_strength else _filter_profile(grid, filter_strength)
    if linearized:
        h = h - dt * field_x[:, None] * eq.derivative(grid.v)[None, :]
        if damping is not None:
            h = _v_shift(h, grid, np.zeros(grid.Nx), threads, damping)
    else:
        h = _shift_with_background(h, grid, eq, field_x * dt, threads, damping)
    h = _x_advect(h, grid, 0.5 * dt, threads)
    h = _remove_mean(h, grid)
    return SimState(grid, state.t + dt, h, state.step + 1)


def apply_kick(state: SimState, kick: Kick, eq: Equilibrium, threads: int = 1) -> SimState:
    grid = state.grid
    shift = kick.amplitude * np.cos(kick.mode * grid.x)
    h = _remove_mean(_shift_with_background(state.h, grid, eq, shift, threads), grid)
    return replace(state, h=h)


@dataclass
class SimulationSetup:
    """Everything run_simulation needs.

    ``dt`` defaults to deta; with diagnostics on it must divide deta.
    """

    grid: PhaseGrid
    eq: Equilibrium
    W: Interaction
    schedule: GevreySchedule
    initial: np.ndarray
    horizon: float
    dt: float | None = None
    linearized: bool = False
    filter_strength: float | None = None
    boundary_tol: float = 1e-6
    diagnostics: bool = True
    snapshot_every: int = 0
    kicks: tuple[Kick, ...] = ()
    threads: int = 1
    log_cap: float = DEFAULT_LOG_CAP

    @property
    def step(self) -> float:
        return self.grid.deta if self.dt is None else float(self.dt)


class BootstrapRow(NamedTuple):
    t: float
    a_rho: float
    q1: float
    q1_scaled: float
    q2: float
    q3: float


@dataclass
class Trajectory:
    """Output of run_simulation.

    ``times``/``rho`` hold rho_k at every step; ``a_rho`` the matching
    A-weighted density norm (zero when diagnostics are off).
    """

    grid: PhaseGrid
    times: np.ndarray
    rho: np.ndarray
    a_rho: np.ndarray
    bootstrap: list[BootstrapRow]
    snapshots: list[tuple[float, FieldSpectrum]]
    gliding: list[FieldSpectrum]
    final: SimState
    initial_spectrum: FieldSpectrum
    metadata: dict = field(default_factory=dict)

    def density_trace(self) -> DensityTrace:
        grid = self.grid
        keep = [i for i, k in enumerate(grid.modes) if k != 0 and k != -grid.Nx // 2]
        return DensityTrace(grid.modes[keep], self.times, self.rho[:, keep].T.copy())


def _diagnostic_stride(grid: PhaseGrid, dt: float) -> int:
    ratio = grid.deta / dt
    stride = int(round(ratio))
    if stride < 1 or abs(ratio - stride) > 1e-9 * ratio:
        raise AlignmentError(f'dt = {dt} does not divide deta = {grid.deta}; '
                             'diagnostics need dt = deta / n')
    return stride


def _kick_steps(kicks, dt: float) -> dict[int, Kick]:
    steps = {}
    for kick in kicks:
        n = int(round(kick.t / dt))
        if abs(n * dt - kick.t) > 1e-9 * max(1.0, kick.t):
            raise AlignmentError(f'Kick time {kick.t} is not a multiple of dt = {dt}')
        steps[n] = kick
    return steps


def boundary_fraction(spec: FieldSpectrum) -> float:
    """Share of the l2 mass in the outer eta band of the lattice."""
    band = max(1, int(spec.grid.Nv * BOUNDARY_BAND))
    power = np.abs(spec.coeffs) ** 2
    total = float(power.sum())
    if total == 0.0:
        return 0.0
    return float((power[:, :band].sum() + power[:, -band:].sum()) / total)


def _data_k_max(grid: PhaseGrid, h: np.ndarray) -> int:
    rho_rows = np.abs(from_real_space(grid, h).coeffs).max(axis=1)
    active = [abs(int(k)) for k, mag in zip(grid.modes, rho_rows) if k != 0 and mag > 1e-14 * rho_rows.max()]
    return max(active) if active else 1


def run_simulation(setup: SimulationSetup) -> Trajectory:
    """Integrate to the horizon and collect density, bootstrap and snapshot diagnostics.

    Raises:
        ResolutionAlarm: boundary mass or capped weights; ``state`` holds the last good state.
        NumericalFailure: non-finite samples; ``state`` holds the last good state.
    """
    grid, eq, W, schedule = setup.grid, setup.eq, setup.W, setup.schedule
    dt = setup.step
    if not dt > 0:
        raise ParameterError(f'Time step must be positive, got {dt}')
    n_steps = int(np.ceil(setup.horizon / dt - 1e-9))
    stride = _diagnostic_stride(grid, dt) if setup.diagnostics else 0
    kicks = _kick_steps(setup.kicks, dt)
    if setup.filter_strength:
        log.warning('High-eta exponential filter on: strength %g, order %d', setup.filter_strength, FILTER_ORDER)

    state = SimState(grid, 0.0, _remove_mean(np.asarray(setup.initial, dtype=float), grid))
    k_max = _data_k_max(grid, state.h)
    validity = grid.validity_horizon(k_max)
    if setup.horizon > validity:
        log.warning('Horizon %g exceeds the validity horizon eta_max/k_max = %g', setup.horizon, validity)
    metadata = {
        'validity_horizon': validity,
        'recurrence_time': grid.recurrence_time(1),
        'dt': dt,
        'steps': n_steps,
        'linearized': setup.linearized,
        'filter_strength': setup.filter_strength or 0.0,
    }
    mass0, casimir0 = state.mass(), state.casimir(eq)
    initial_spectrum = state.spectrum

    nonzero = np.array([i for i, k in enumerate(grid.modes) if k != 0 and k != -grid.Nx // 2])
    diag_count = n_steps // stride if stride else 0
    gliding_from = diag_count // 2
    gliding_every = max(1, (diag_count - gliding_from) // GLIDING_SAMPLES)

    times = np.zeros(n_steps + 1)
    rho = np.zeros((n_steps + 1, grid.Nx), dtype=complex)
    a_rho = np.zeros(n_steps + 1)
    bootstrap: list[BootstrapRow] = []
    snapshots: list[tuple[float, FieldSpectrum]] = []
    gliding_samples: list[FieldSpectrum] = []
    q3 = 0.0

    def observe(n: int, current: SimState) -> None:
        nonlocal q3
        times[n] = current.t
        rho[n] = current.density()
        if not setup.diagnostics:
            return
        a_rho[n] = density_norm(grid.modes[nonzero], rho[n, nonzero], schedule, current.t,
                                log_cap=setup.log_cap)
        if n > 0:
            q3 += 0.5 * dt * (a_rho[n - 1] ** 2 + a_rho[n] ** 2)
        if n % stride:
            return
        lab = current.spectrum
        fraction = boundary_fraction(lab)
        if fraction > setup.boundary_tol:
            raise ResolutionAlarm(f'Mass fraction {fraction:.3e} at the eta boundary at t={current.t:g} '
                                  f'exceeds {setup.boundary_tol:g}', state=current)
        glide = to_gliding(lab, current.t)
        q1 = gevrey_norm_report(glide, schedule, current.t, 1.0, schedule.M, setup.log_cap)
        q2 = gevrey_norm_report(glide, schedule, current.t, -schedule.beta, schedule.M, setup.log_cap)
        if q1.capped or q2.capped:
            raise ResolutionAlarm(f'Gevrey weights capped at t={current.t:g}', state=current)
        bracket_t = np.sqrt(1.0 + current.t ** 2)
        bootstrap.append(BootstrapRow(current.t, a_rho[n], q1.value ** 2, q1.value ** 2 / bracket_t ** 7,
                                      q2.value ** 2, q3))
        diag = n // stride
        if setup.snapshot_every and diag % setup.snapshot_every == 0:
            snapshots.append((current.t, lab))
        if diag >= gliding_from and (diag - gliding_from) % gliding_every == 0:
            gliding_samples.append(glide)

    observe(0, state)
    for n in range(1, n_steps + 1):
        if n - 1 in kicks:
            log.info('Kick mode %d amplitude %g at t=%g', kicks[n - 1].mode, kicks[n - 1].amplitude, state.t)
            state = apply_kick(state, kicks[n - 1], eq, setup.threads)
        new = step_strang(state, dt, eq, W, setup.linearized, setup.filter_strength, setup.threads)
        new = replace(new, t=n * dt)
        if not np.all(np.isfinite(new.h)):
            raise NumericalFailure(f'Non-finite samples at step {n} (t={new.t:g})', state=state)
        observe(n, new)
        state = new

    span = max(state.t, dt)
    metadata['mass_drift'] = abs(state.mass() - mass0) / span
    metadata['casimir_drift'] = abs(state.casimir(eq) - casimir0) / max(casimir0, 1e-300) / span
    if metadata['casimir_drift'] > 1e-8:
        log.warning('L2 Casimir drift %.3e per unit time', metadata['casimir_drift'])
    log.info('Simulation finished at t=%g after %d steps', state.t, n_steps)
    return Trajectory(grid, times, rho, a_rho, bootstrap, snapshots, gliding_samples, state,
                      initial_spectrum, metadata)


@dataclass
class AsymptoticProfile:
    """Final gliding-frame spectrum and the rate at which the gliding spectrum approaches it."""

    h_inf: FieldSpectrum
    rate: float
    distances: list[tuple[float, float]]


def asymptotic_profile(trajectory: Trajectory, lam: float, s: float, sigma: float = 0.0,
                       decay_tol: float = 1e-2) -> AsymptoticProfile:
    """h_inf and the fitted exponential rate of ||f(t) - f(T)|| in G^{lam, sigma; s}.

    Raises:
        InstabilityError: the density has not decayed below decay_tol of its peak.
    """
    mags = np.abs(trajectory.rho).max(axis=1)
    if mags.max() > 0 and mags[-1] > decay_tol * mags.max():
        raise InstabilityError(f'Density has not decayed (final {mags[-1]:.3e}, peak {mags.max():.3e}); '
                               'no asymptotic profile')
    final = trajectory.final
    h_inf = to_gliding(final.spectrum, final.t)
    distances = []
    for sample in trajectory.gliding:
        if sample.frame.t >= final.t:
            continue
        diff = sample.coeffs - h_inf.coeffs
        distances.append((sample.frame.t, radius_norm(sample.with_coeffs(diff), lam, s, sigma)))
    scale = radius_norm(h_inf, lam, s, sigma)
    useful = [(t, d) for t, d in distances if d > 1e-13 * max(scale, 1e-300)]
    if len(useful) < 2:
        log.info('Gliding spectrum constant to rounding; no rate fitted')
        return AsymptoticProfile(h_inf, np.inf, distances)
    ts, ds = zip(*useful)
    fit = fit_decay_rate(np.array(ts), np.array(ds), ts[0], ts[-1])
    return AsymptoticProfile(h_inf, -fit.rate, distances)
