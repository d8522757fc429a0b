"""
Mode-by-mode linear response: the Volterra equation for the density

    phi_k(t) = F_k(t) + int_0^t K(t - tau, k) phi_k(tau) dtau,
    K(t, k) = -f0^(kt) W(k) k^2 t,

its forcing from initial data, the linear final state in the gliding
frame, and the A-weighted ratio of solution to forcing.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Union

import numba
import numpy as np
from scipy.special import logsumexp

from .equilibria import Equilibrium, Interaction
from .errors import AlignmentError, GridError, InstabilityError, ParameterError
from .gevrey import GevreySchedule, gevrey_log_weight
from .grid import FieldSpectrum, PhaseGrid, gliding, velocity_samples
from .parallel import parallel_map

log = logging.getLogger(__name__)

numba_kwargs = {
    'nopython': True,
    'cache': True,
    'nogil': True,
}


@numba.jit(**numba_kwargs)
def _march(kernel, forcing, dt):
    n_steps = forcing.shape[0]
    phi = np.empty(n_steps, dtype=np.complex128)
    if n_steps == 0:
        return phi
    phi[0] = forcing[0]
    denom = 1.0 - 0.5 * dt * kernel[0]
    for n in range(1, n_steps):
        acc = 0.5 * kernel[n] * phi[0]
        for m in range(1, n):
            acc += kernel[n - m] * phi[m]
        phi[n] = (forcing[n] + dt * acc) / denom
    return phi


@dataclass(frozen=True, eq=False)
class VolterraProblem:
    """Kernel and forcing sampled at t_n = n dt, n = 0..N."""

    kernel: np.ndarray
    forcing: np.ndarray
    dt: float

    def __post_init__(self) -> None:
        if self.kernel.ndim != 1 or self.kernel.shape != self.forcing.shape:
            raise GridError(f'Kernel {self.kernel.shape} and forcing {self.forcing.shape} '
                            'must be sampled on the same time grid')
        if not self.dt > 0:
            raise ParameterError(f'Time step must be positive, got {self.dt}')

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.kernel.size) * self.dt

    @staticmethod
    def sample(kernel: Callable, forcing: Callable, horizon: float, dt: float) -> VolterraProblem:
        times = np.arange(_step_count(horizon, dt) + 1) * dt
        return VolterraProblem(np.asarray(kernel(times), dtype=complex) * np.ones(times.size),
                               np.asarray(forcing(times), dtype=complex) * np.ones(times.size), dt)


def _step_count(horizon: float, dt: float) -> int:
    if not dt > 0 or horizon < 0:
        raise ParameterError(f'Need dt > 0 and horizon >= 0, got dt={dt}, horizon={horizon}')
    return int(round(horizon / dt))


def solve_volterra(problem: VolterraProblem) -> np.ndarray:
    """Product trapezoid march; phi_0 = F_0 and each step solves for phi_n explicitly."""
    return _march(np.ascontiguousarray(problem.kernel, dtype=np.complex128),
                  np.ascontiguousarray(problem.forcing, dtype=np.complex128), float(problem.dt))


def kernel_samples(eq: Equilibrium, W: Interaction, k: int, times) -> np.ndarray:
    times = np.asarray(times, dtype=float)
    return -eq.transform(k * times) * float(W.multiplier(k)) * k ** 2 * times


def richardson_exponent(kernel: Callable, forcing: Callable, horizon: float, dt: float) -> float:
    """Observed order p from steps dt and dt/2 against a dt/8 reference."""
    coarse = solve_volterra(VolterraProblem.sample(kernel, forcing, horizon, dt))
    fine = solve_volterra(VolterraProblem.sample(kernel, forcing, horizon, dt / 2))
    ref = solve_volterra(VolterraProblem.sample(kernel, forcing, horizon, dt / 8))
    err_coarse = np.max(np.abs(coarse - ref[::8]))
    err_fine = np.max(np.abs(fine - ref[::4]))
    return float(np.log2(err_coarse / err_fine))


class GaussianPerturbation:
    """Initial data h_in = sum_k eps_k cos(k x) M(v) with M a Maxwellian of temperature theta.

    Its joint spectrum is c_{+-k} e^{-theta eta^2 / 2} with c_{+-k} = eps_k / 2,
    so the free-transport forcing F_k(t) = c_k e^{-theta k^2 t^2 / 2} is exact.
    """

    def __init__(self, amplitudes: dict[int, float], theta: float = 1.0):
        if not theta > 0:
            raise ParameterError(f'Perturbation temperature must be positive, got {theta}')
        for k in amplitudes:
            if k <= 0:
                raise ParameterError(f'Perturbation modes must be positive integers, got {k}')
        self.amplitudes = {int(k): float(a) for k, a in amplitudes.items()}
        self.theta = float(theta)

    def __repr__(self) -> str:
        return f'GaussianPerturbation({self.amplitudes}, theta={self.theta})'

    def scaled(self, factor: float) -> GaussianPerturbation:
        return GaussianPerturbation({k: a * factor for k, a in self.amplitudes.items()}, self.theta)

    @property
    def modes(self) -> list[int]:
        return sorted([-k for k in self.amplitudes] + list(self.amplitudes))

    def coefficient(self, k: int) -> float:
        return 0.5 * self.amplitudes.get(abs(int(k)), 0.0)

    def value(self, k: int, eta) -> np.ndarray:
        return self.coefficient(k) * np.exp(-0.5 * self.theta * np.asarray(eta, dtype=float) ** 2)

    def forcing(self, k: int, times) -> np.ndarray:
        times = np.asarray(times, dtype=float)
        return self.value(k, k * times).astype(complex)

    def spectrum(self, grid: PhaseGrid) -> FieldSpectrum:
        coeffs = np.zeros(grid.shape, dtype=complex)
        for k in self.modes:
            coeffs[grid.mode_index(k)] = self.value(k, grid.etas)
        return FieldSpectrum(grid, coeffs)

    def real_space(self, grid: PhaseGrid) -> np.ndarray:
        x = grid.x[:, None]
        profile = np.exp(-0.5 * grid.v ** 2 / self.theta) / np.sqrt(2 * np.pi * self.theta)
        field_x = sum(a * np.cos(k * x) for k, a in self.amplitudes.items())
        return field_x * profile[None, :]


InitialData = Union[GaussianPerturbation, FieldSpectrum]


@dataclass
class DensityTrace:
    """rho_k(t_n) for a set of nonzero modes on a uniform time grid."""

    modes: np.ndarray
    times: np.ndarray
    values: np.ndarray
    horizons: dict[int, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.modes = np.asarray(self.modes, dtype=int)
        if np.any(self.modes == 0):
            raise ParameterError('Density traces hold nonzero modes only')
        if self.values.shape != (self.modes.size, self.times.size):
            raise GridError(f'Trace values {self.values.shape} do not match '
                            f'{self.modes.size} modes x {self.times.size} times')
        steps = np.diff(self.times)
        if steps.size and np.ptp(steps) > 1e-9 * max(1.0, float(self.times[-1])):
            raise GridError('Trace time grid is not uniform')

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0])

    def mode(self, k: int) -> np.ndarray:
        hits = np.nonzero(self.modes == k)[0]
        if not hits.size:
            raise KeyError(f'Mode {k} not in trace')
        return self.values[hits[0]]

    def horizon(self, k: int) -> float:
        return self.horizons.get(int(k), np.inf)


def _data_modes(h_in: InitialData) -> list[int]:
    if isinstance(h_in, GaussianPerturbation):
        return h_in.modes
    grid = h_in.grid
    return [int(k) for k in grid.modes
            if k != 0 and k != -grid.Nx // 2 and np.any(h_in.mode(k))]


def _row_forcing(spec: FieldSpectrum, k: int, times: np.ndarray, dt: float) -> np.ndarray:
    grid = spec.grid
    out = np.zeros(times.size, dtype=complex)
    if grid.is_aligned(dt):
        cols = grid.Nv // 2 + k * grid.eta_steps(dt) * np.arange(times.size)
        inside = (cols >= 0) & (cols < grid.Nv)
        out[inside] = spec.mode(k)[cols[inside]]
        return out
    # trigonometric interpolant dv sum_j g(v_j) exp(-i eta v_j), exact on the lattice
    etas = k * times
    inside = (etas >= -grid.eta_max) & (etas < grid.eta_max)
    samples = velocity_samples(grid, spec.mode(k))
    out[inside] = grid.dv * (np.exp(-1j * np.outer(etas[inside], grid.v)) @ samples)
    return out


def forcing_trace(h_in: InitialData, horizon: float, dt: float) -> DensityTrace:
    """F_k(t_n) = h_in(k, k t_n), the free-transport density.

    Lattice data is read off the eta lattice when dt is a multiple of deta
    and through its trigonometric interpolant otherwise.  Forcing beyond
    eta_max is set to zero and the mode's validity horizon recorded.
    """
    times = np.arange(_step_count(horizon, dt) + 1) * dt
    modes = _data_modes(h_in)
    values = np.zeros((len(modes), times.size), dtype=complex)
    horizons: dict[int, float] = {}
    if isinstance(h_in, GaussianPerturbation):
        for i, k in enumerate(modes):
            values[i] = h_in.forcing(k, times)
    else:
        grid = h_in.grid
        for i, k in enumerate(modes):
            values[i] = _row_forcing(h_in, k, times, dt)
            if abs(k) * times[-1] >= grid.eta_max:
                horizons[k] = grid.validity_horizon(k)
                log.warning('Forcing of mode %d leaves the eta lattice at t=%.6g before horizon %.6g',
                            k, horizons[k], horizon)
    return DensityTrace(np.array(modes, dtype=int), times, values, horizons)


def linear_density(h_in: InitialData, eq: Equilibrium, W: Interaction, horizon: float, dt: float,
                   threads: int = 1) -> DensityTrace:
    """Linearized density rho_k(t_n) for every data mode, one Volterra solve per mode."""
    forcing = forcing_trace(h_in, horizon, dt)

    def solve_mode(i):
        k = int(forcing.modes[i])
        kernel = kernel_samples(eq, W, k, forcing.times)
        return solve_volterra(VolterraProblem(kernel, forcing.values[i], dt))

    rows = parallel_map(solve_mode, range(forcing.modes.size), threads)
    values = np.array(rows) if rows else np.zeros((0, forcing.times.size), dtype=complex)
    return DensityTrace(forcing.modes, forcing.times, values, dict(forcing.horizons))


def estimate_weighted_ratio(trace: DensityTrace, forcing: DensityTrace, schedule: GevreySchedule) -> float:
    """max_k of (sum_n A_k(t_n, k t_n)^2 |phi_k|^2)^(1/2) / (same for F_k).

    An empirical lower bound on the linear-control constant.  Sums are
    formed in log space; modes with zero forcing are skipped.
    """
    if trace.values.shape != forcing.values.shape or not np.array_equal(trace.modes, forcing.modes) \
            or not np.allclose(trace.times, forcing.times):
        raise GridError('Solution and forcing traces must share modes and times')
    best = 0.0
    for i, k in enumerate(trace.modes):
        if not np.any(forcing.values[i]):
            log.info('Mode %d has zero forcing, skipped', k)
            continue
        logw = gevrey_log_weight(schedule, trace.times, k, k * trace.times)
        with np.errstate(divide='ignore'):
            num = logsumexp(2 * logw + 2 * np.log(np.abs(trace.values[i])))
            den = logsumexp(2 * logw + 2 * np.log(np.abs(forcing.values[i])))
        best = max(best, float(np.exp(0.5 * (num - den))))
    return best


class DecayFit(NamedTuple):
    rate: float
    frequency: float
    samples: int


def _local_peaks(mags: np.ndarray) -> np.ndarray:
    inner = (mags[1:-1] > mags[:-2]) & (mags[1:-1] >= mags[2:])
    return np.nonzero(inner)[0] + 1


def fit_decay_rate(times, values, t_min: float, t_max: float) -> DecayFit:
    """Exponential rate of |values| over [t_min, t_max].

    Oscillating (real) traces are fitted through their local maxima and the
    frequency is read from the peak spacing; otherwise all samples are used
    and the frequency comes from the phase slope.
    """
    times = np.asarray(times, dtype=float)
    values = np.asarray(values)
    window = (times >= t_min) & (times <= t_max)
    t = times[window]
    mags = np.abs(values[window])
    peaks = _local_peaks(mags)
    if peaks.size >= 3:
        slope = np.polyfit(t[peaks], np.log(mags[peaks]), 1)[0]
        frequency = np.pi / float(np.mean(np.diff(t[peaks])))
        return DecayFit(float(slope), frequency, int(peaks.size))
    if t.size < 2 or np.any(mags == 0):
        raise ParameterError(f'Cannot fit a decay rate on [{t_min}, {t_max}]')
    slope = np.polyfit(t, np.log(mags), 1)[0]
    frequency = abs(np.polyfit(t, np.unwrap(np.angle(values[window])), 1)[0])
    return DecayFit(float(slope), float(frequency), int(t.size))


@dataclass
class FinalState:
    """Linear final state h^L_inf in the gliding frame and the bound on the truncated tail."""

    spectrum: FieldSpectrum
    tail_bound: float
    trace: DensityTrace


def _envelope_decay(times: np.ndarray, rho: np.ndarray) -> tuple[float, float]:
    T = times[-1]
    mid = np.max(np.abs(rho[(times >= 0.25 * T) & (times <= 0.5 * T)]))
    late = np.max(np.abs(rho[times >= 0.75 * T]))
    return float(mid), float(late)


def linear_final_state(h_in: InitialData, eq: Equilibrium, W: Interaction, horizon: float,
                       grid: PhaseGrid | None = None, dt: float | None = None,
                       threads: int = 1) -> FinalState:
    """h^L_inf,k(eta) = h_in,k(eta) - int_0^T rho_k(tau) W(k) k (eta - k tau) f0^(eta - k tau) dtau.

    The field term is a rank-one update per mode and time sample, summed by
    the trapezoid rule; the tail beyond T is bounded from the envelope
    decay of rho_k between [T/4, T/2] and [3T/4, T].

    Raises:
        InstabilityError: rho_k does not decay over the run.
    """
    if isinstance(h_in, FieldSpectrum):
        grid = h_in.grid
        base = h_in
    else:
        if grid is None:
            raise ParameterError('A grid is needed to tabulate analytic initial data')
        base = h_in.spectrum(grid)
    if dt is None:
        dt = grid.deta / 4
    ratio = grid.deta / dt
    if abs(ratio - round(ratio)) > 1e-9 * ratio or round(ratio) < 1:
        raise AlignmentError(f'dt = {dt} must divide deta = {grid.deta} for a gliding-frame final state')
    # the final frame must sit on the lattice
    horizon = grid.deta * np.ceil(horizon / grid.deta - 1e-9)
    trace = linear_density(h_in, eq, W, horizon, dt, threads)
    coeffs = base.coeffs.copy()
    etas = grid.etas
    weights = np.full(trace.times.size, dt)
    weights[[0, -1]] *= 0.5
    tail = 0.0
    slope_sup = float(np.max(np.abs(etas * eq.transform(etas))))
    for i, k in enumerate(trace.modes):
        wk = float(W.multiplier(k))
        if wk == 0.0:
            continue
        rho = trace.values[i]
        mid, late = _envelope_decay(trace.times, rho)
        if late >= mid:
            raise InstabilityError(f'Linear density of mode {k} does not decay '
                                   f'(envelope {mid:.3e} -> {late:.3e}); no final state')
        rate = np.log(mid / late) / (0.5 * trace.times[-1])
        tail = max(tail, abs(wk * k) * slope_sup * late / rate)
        shifted = etas[None, :] - k * trace.times[:, None]
        update = (weights * rho)[:, None] * shifted * eq.transform(shifted)
        coeffs[grid.mode_index(k)] -= wk * k * np.sum(update, axis=0)
    return FinalState(FieldSpectrum(grid, coeffs, gliding(trace.times[-1])), tail, trace)
