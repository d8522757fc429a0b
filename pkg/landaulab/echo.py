"""
Plasma-echo analysis: the time-response kernel, its moments over modes and
times, the resonant/non-resonant split, the critical-exponent sweep and the
two-mode kick echo experiment.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.integrate import trapezoid
from scipy.special import gammaincc, gammaln

from .equilibria import Equilibrium, Interaction
from .errors import ParameterError
from .gevrey import GevreySchedule, japanese, lambda_at
from .grid import FieldSpectrum, PhaseGrid
from .parallel import parallel_map
from .vlasov import Kick, SimulationSetup, run_simulation
from .volterra import GaussianPerturbation

log = logging.getLogger(__name__)

TAIL_FLAG = 0.01
_CHUNK = 16


@dataclass(frozen=True)
class EchoKernelConfig:
    """Surrogate kernel parameters.

    ``delta`` stands in for the decay of the background spectrum and
    defaults to (1 - c) alpha0; ``l_max`` truncates mode sums.
    """

    schedule: GevreySchedule
    c: float = 0.9
    delta: float | None = None
    l_max: int = 64

    def __post_init__(self) -> None:
        if not 0 < self.c < 1:
            raise ParameterError(f'c must lie in (0, 1), got {self.c}')
        if self.delta is not None and not self.delta > 0:
            raise ParameterError(f'delta must be positive, got {self.delta}')
        if self.l_max < 0:
            raise ParameterError(f'l_max must be >= 0, got {self.l_max}')

    @property
    def gamma(self) -> float:
        return self.schedule.gamma

    @property
    def decay(self) -> float:
        if self.delta is not None:
            return self.delta
        return (1 - self.c) * self.schedule.alpha0


def quadrature_step(t: float) -> float:
    return min(0.1, t / 2000)


def _uniform(lo: float, hi: float) -> np.ndarray:
    n = max(1, int(np.ceil((hi - lo) / quadrature_step(hi) - 1e-9)))
    return np.linspace(lo, hi, n + 1)


def _nu(cfg: EchoKernelConfig, t: float, tau) -> np.ndarray:
    return lambda_at(cfg.schedule, tau).value - lambda_at(cfg.schedule, t).value


def response_kernel_surrogate(cfg: EchoKernelConfig, k: int, l: int, t: float, tau) -> np.ndarray:
    """exp(-nu(t,tau) <k,kt>^s) (<tau> / |l|^gamma) exp(-delta <k-l, kt-l tau>^s)."""
    tau = np.asarray(tau, dtype=float)
    if np.any(tau < 0) or np.any(tau > t):
        raise ParameterError('Kernel needs 0 <= tau <= t')
    if l == 0:
        return np.zeros_like(tau)
    s = cfg.schedule.s
    growth = np.exp(-_nu(cfg, t, tau) * japanese(k, k * t) ** s)
    return growth * np.sqrt(1 + tau ** 2) / abs(l) ** cfg.gamma \
        * np.exp(-cfg.decay * japanese(k - l, k * t - l * tau) ** s)


def instantaneous_kernel(cfg: EchoKernelConfig, k: int, t: float, tau) -> np.ndarray:
    """|k (t - tau)| |k|^-gamma exp(-delta <0, k(t - tau)>^s), the l = k contribution."""
    gap = k * (t - np.asarray(tau, dtype=float))
    return np.abs(gap) / abs(k) ** cfg.gamma * np.exp(-cfg.decay * japanese(0, gap) ** cfg.schedule.s)


def response_kernel_empirical(snapshot: FieldSpectrum, schedule: GevreySchedule, W: Interaction,
                              k: int, l: int, t: float, c: float = 0.9) -> float:
    """K_{k,l}(t, tau) from a gliding spectrum taken at tau.

    |l|^-gamma exp((lambda(t) - lambda(tau)) <k,kt>^s) exp(c lambda(tau) <k-l, kt-l tau>^s)
    |k (t - tau)| |f_{k-l}(tau, kt - l tau)|, read off the lattice without interpolation.

    Raises:
        AlignmentError: kt - l tau is not a lattice frequency.
    """
    if snapshot.frame.kind != 'gliding':
        raise ParameterError('Empirical kernel needs a gliding-frame spectrum')
    if l == 0:
        return 0.0
    tau = snapshot.frame.t
    if not 0 <= tau <= t:
        raise ParameterError('Kernel needs 0 <= tau <= t')
    grid = snapshot.grid
    eta = k * t - l * tau
    value = snapshot.coeffs[grid.mode_index(k - l), grid.eta_index(eta)]
    s = schedule.s
    lam_t = lambda_at(schedule, t).value
    lam_tau = lambda_at(schedule, tau).value
    log_factor = (lam_t - lam_tau) * japanese(k, k * t) ** s + c * lam_tau * japanese(k - l, eta) ** s
    return float(abs(l) ** -W.gamma * np.exp(log_factor) * abs(k * (t - tau)) * abs(value))


class MomentEstimate(NamedTuple):
    value: float
    tail_bound: float

    @property
    def flagged(self) -> bool:
        return self.tail_bound > TAIL_FLAG * self.value


def _decay_moment(cfg: EchoKernelConfig, order: int, X) -> np.ndarray:
    """int_X^inf u^order exp(-delta u^s) du."""
    s, delta = cfg.schedule.s, cfg.decay
    a = (order + 1) / s
    X = np.maximum(np.asarray(X, dtype=float), 0.0)
    return np.exp(gammaln(a) - a * np.log(delta) - np.log(s)) * gammaincc(a, delta * X ** s)


def _mode_tail(cfg: EchoKernelConfig, anchor: int, scale: float, power: float,
               reach: float | None = None) -> float:
    """Bound on the modes |m| > l_max left out of a moment sum.

    With <a, b> >= |a| + |b| and x = anchor t - m tau, each left-out term is
    at most (2 scale / |m|^power) G_0(A), A = |anchor - m|, where
    G_j(A) = int_A^inf u^j e^{-delta u^s} du.  When the integrand carries
    <tau> <= 1 + (reach + |x|) / |m| the term gains
    ((reach - A) G_0(A) + G_1(A)) / |m|.  Terms up to 200 l_max are summed
    and the rest bounded by integrals of G_j.
    """
    L = cfg.l_max
    edge = 200 * max(L, 1)
    far = np.arange(L + 1, edge + 1, dtype=float)
    total = 0.0
    for m in (far, -far):
        A = np.abs(anchor - m)
        g0 = _decay_moment(cfg, 0, A)
        terms = g0
        if reach is not None:
            terms = g0 + ((reach - A) * g0 + _decay_moment(cfg, 1, A)) / far
        total += float(np.sum(2 * scale * terms / far ** power))
    X = edge - 1 - abs(anchor)
    rest = _decay_moment(cfg, 1, X)
    if reach is not None:
        rest = (1 + reach) * rest + 0.5 * _decay_moment(cfg, 2, X)
    return total + 4 * scale * float(rest)


def _warn_tail(name: str, est: MomentEstimate) -> MomentEstimate:
    if est.flagged:
        log.warning('%s: mode tail bound %.3e exceeds %g of the sum %.3e; raise l_max',
                    name, est.tail_bound, TAIL_FLAG, est.value)
    return est


def _modes(cfg: EchoKernelConfig, skip: int) -> np.ndarray:
    L = cfg.l_max
    return np.array([m for m in range(-L, L + 1) if m != 0 and m != skip], dtype=int)


def moment_I(cfg: EchoKernelConfig, t: float, k: int) -> MomentEstimate:
    """int_0^t sum_{l != 0} K_{k,l}(t, tau) dtau with the l = k term taken instantaneous."""
    tau = _uniform(0.0, t)
    s = cfg.schedule.s
    base = np.exp(-_nu(cfg, t, tau) * japanese(k, k * t) ** s) * np.sqrt(1 + tau ** 2)
    total = float(trapezoid(instantaneous_kernel(cfg, k, t, tau), tau))
    modes = _modes(cfg, k)
    for start in range(0, modes.size, _CHUNK):
        ls = modes[start:start + _CHUNK, None]
        terms = base[None, :] * np.exp(-cfg.decay * japanese(k - ls, k * t - ls * tau[None, :]) ** s)
        total += float(np.sum(trapezoid(terms, tau, axis=1) / np.abs(ls[:, 0]) ** cfg.gamma))
    tail = _mode_tail(cfg, k, 1.0, 1 + cfg.gamma, reach=abs(k) * t) if cfg.l_max else 0.0
    return _warn_tail(f'moment_I(t={t:g}, k={k})', MomentEstimate(total, tail))


def moment_II(cfg: EchoKernelConfig, tau: float, l: int, horizon: float) -> MomentEstimate:
    """int_tau^T sum_{k != 0} K_{k,l}(t, tau) dt with the k = l term taken instantaneous."""
    if not 0 <= tau <= horizon:
        raise ParameterError('moment_II needs 0 <= tau <= horizon')
    t = _uniform(tau, horizon) if horizon > tau else np.array([tau])
    s = cfg.schedule.s
    lam_tau = lambda_at(cfg.schedule, tau).value
    lam_t = lambda_at(cfg.schedule, t).value
    total = float(trapezoid(np.abs(l * (t - tau)) / abs(l) ** cfg.gamma
                            * np.exp(-cfg.decay * japanese(0, l * (t - tau)) ** s), t)) if t.size > 1 else 0.0
    modes = _modes(cfg, l)
    for start in range(0, modes.size, _CHUNK):
        ks = modes[start:start + _CHUNK, None]
        terms = np.exp(-(lam_tau - lam_t)[None, :] * japanese(ks, ks * t[None, :]) ** s) \
            * np.exp(-cfg.decay * japanese(ks - l, ks * t[None, :] - l * tau) ** s)
        if t.size > 1:
            total += float(np.sum(trapezoid(terms, t, axis=1))) * np.sqrt(1 + tau ** 2) / abs(l) ** cfg.gamma
    weight = np.sqrt(1 + tau ** 2) / abs(l) ** cfg.gamma
    tail = _mode_tail(cfg, l, weight, 1.0) if cfg.l_max else 0.0
    return _warn_tail(f'moment_II(tau={tau:g}, l={l})', MomentEstimate(total, tail))


def sup_kernel(cfg: EchoKernelConfig, t: float) -> float:
    """sup over tau in [0, t] and 1 <= l <= l_max of sum_{k != 0} K_{k,l}(t, tau).

    Evaluated on a uniform grid of 2001 points together with every
    resonant time k t / l.
    """
    L = max(cfg.l_max, 1)
    ks = np.array([m for m in range(-L, L + 1) if m != 0], dtype=float)
    best = 0.0
    for l in range(1, L + 1):
        resonant = ks[ks > 0] * t / l
        tau = np.union1d(np.linspace(0.0, t, 2001), resonant[resonant <= t])
        total = np.zeros_like(tau)
        for start in range(0, ks.size, _CHUNK):
            chunk = ks[start:start + _CHUNK]
            total += sum(response_kernel_surrogate(cfg, int(k), l, t, tau) for k in chunk)
        best = max(best, float(np.max(total)))
    return best


@dataclass
class ResonantSplit:
    """Short-time, resonant and non-resonant parts of int_0^t K_{k,l}(t, tau) dtau."""

    k: int
    l: int
    t: float
    interval: tuple[float, float] | None
    short: float
    resonant: float
    nonresonant: float
    total: float
    bound: float

    @property
    def parts(self) -> float:
        return self.short + self.resonant + self.nonresonant


def resonant_bound(cfg: EchoKernelConfig, k: int, l: int, t: float) -> float:
    """k t / l^(2+gamma) exp(-d |kt|^(s-a) / l^(1-a)), d = a delta' / (2^(1-a) 3^a), delta' = (lambda0 - lambda') / 4."""
    schedule = cfg.schedule
    a = schedule.a
    delta_p = (schedule.lambda0 - schedule.lambda_prime) / 4
    scaled = a * delta_p / (2 ** (1 - a) * 3 ** a)
    return float(k * t / l ** (2 + cfg.gamma) * np.exp(-scaled * abs(k * t) ** (schedule.s - a) / l ** (1 - a)))


def resonant_split(cfg: EchoKernelConfig, k: int, l: int, t: float) -> ResonantSplit:
    """Split at tau = 1 and at the resonant interval |kt - l tau| < t/2.

    The quadrature grid contains every breakpoint so the three trapezoid
    sums add up to the full one.
    """
    if k < 1 or l < 1:
        raise ParameterError('resonant_split takes k, l >= 1')
    if t <= 1:
        raise ParameterError('resonant_split needs t > 1')
    lo = max((k * t - t / 2) / l, 1.0)
    hi = min((k * t + t / 2) / l, t)
    interval = (lo, hi) if lo < hi else None
    breaks = [1.0] + ([lo, hi] if interval else [])
    tau = np.union1d(_uniform(0.0, t), breaks)
    values = response_kernel_surrogate(cfg, k, l, t, tau)
    pieces = 0.5 * (values[1:] + values[:-1]) * np.diff(tau)
    left, right = tau[:-1], tau[1:]
    in_short = right <= 1.0
    in_res = np.zeros_like(in_short) if interval is None else (left >= lo) & (right <= hi)
    short = float(np.sum(pieces[in_short]))
    resonant = float(np.sum(pieces[in_res]))
    nonresonant = float(np.sum(pieces[~in_short & ~in_res]))
    return ResonantSplit(k, l, t, interval, short, resonant, nonresonant, float(np.sum(pieces)),
                         resonant_bound(cfg, k, l, t))


def kernel_profile(cfg: EchoKernelConfig, k: int, l: int, t: float) -> tuple[np.ndarray, np.ndarray]:
    tau = _uniform(0.0, t)
    return tau, response_kernel_surrogate(cfg, k, l, t, tau)


class SweepRow(NamedTuple):
    s: float
    horizon: float
    sup_moment: float
    surrogate: bool
    converged: bool


@dataclass
class SweepResult:
    rows: list[SweepRow]
    classes: dict[float, str] = field(default_factory=dict)


def classify_growth(values) -> str:
    """'bounded' if every step ratio is <= 1.1, 'growing' if the first exceeds 2, else 'marginal'."""
    values = np.asarray(values, dtype=float)
    ratios = values[1:] / values[:-1]
    if np.all(ratios <= 1.1):
        return 'bounded'
    if ratios.size and ratios[0] > 2:
        return 'growing'
    return 'marginal'


def classify_bracket(lower, upper) -> str:
    """Class of sup-moments known only to lie in [lower, upper], or 'unconverged'.

    Step ratios then lie in [lower_{i+1} / upper_i, upper_{i+1} / lower_i];
    a class is returned only if every ratio in those intervals gives it.
    """
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    low = lower[1:] / upper[:-1]
    high = upper[1:] / lower[:-1]
    if np.all(high <= 1.1):
        return 'bounded'
    if low.size and low[0] > 2:
        return 'growing'
    if np.any(low > 1.1) and high[0] <= 2:
        return 'marginal'
    return 'unconverged'


def time_grid(horizons, per_decade: int) -> np.ndarray:
    """Nested log grid 10^(j / per_decade) from one decade below the first horizon."""
    first = np.log10(min(horizons)) - 1
    last = np.log10(max(horizons))
    j = np.arange(int(np.floor(first * per_decade)), int(np.ceil(last * per_decade)) + 1)
    grid = 10.0 ** (j / per_decade)
    return np.union1d(grid[grid <= max(horizons)], horizons)


def critical_exponent_sweep(s_values, horizons, gamma: float = 1.0, lambda0: float = 66.0,
                            lambda_prime: float = 2.0, k_max: int = 4, l_max: int = 64,
                            a0: float = 0.05, c: float = 0.9, delta: float | None = None,
                            per_decade: int = 10, threads: int = 1) -> SweepResult:
    """sup_{t <= T} max_{1 <= k <= k_max} moment_I(t, k) for every (s, T).

    Exponents at or below 1/(2+gamma) use the schedule with fixed decay
    exponent a0; those rows are marked surrogate.  A row is converged when
    every moment up to T has its mode tail within TAIL_FLAG of the sum.
    Exponents with flagged rows are classified from the bracket between the
    sups and the sups with tail bounds added, or marked unconverged.
    """
    horizons = sorted(float(T) for T in horizons)
    times = time_grid(horizons, per_decade)
    result = SweepResult([])
    for s in s_values:
        schedule = GevreySchedule(s, lambda0, lambda_prime, gamma=gamma)
        surrogate = schedule.a <= 0
        if surrogate:
            log.info('s = %g is below 1/(2+gamma) = %g: using fixed radius exponent a0 = %g',
                     s, schedule.critical_s, a0)
            schedule = schedule.with_exponent(a0)
        cfg = EchoKernelConfig(schedule, c, delta, l_max)

        def cell(t, cfg=cfg):
            ests = [moment_I(cfg, t, k) for k in range(1, k_max + 1)]
            return (max(e.value for e in ests), max(e.value + e.tail_bound for e in ests),
                    any(e.flagged for e in ests))

        cells = parallel_map(cell, list(times), threads)
        values = np.array([v for v, _, _ in cells])
        upper = np.array([u for _, u, _ in cells])
        flagged = np.array([f for _, _, f in cells], dtype=bool)
        sups, bounds = [], []
        for T in horizons:
            upto = times <= T * (1 + 1e-12)
            sups.append(float(np.max(values[upto])))
            bounds.append(float(np.max(upper[upto])))
            result.rows.append(SweepRow(float(s), T, sups[-1], surrogate, not np.any(flagged[upto])))
        if np.any(flagged):
            label = classify_bracket(sups, bounds)
            log.warning('s = %g: mode tails exceed %g of the moments; class from the bracket: %s',
                        s, TAIL_FLAG, label)
        else:
            label = classify_growth(sups)
        result.classes[float(s)] = label
        log.info('s = %g: %s (%s)', s, label, ', '.join(f'{v:.4g}' for v in sups))
    return result


@dataclass
class EchoResult:
    detected: bool
    t_echo: float | None
    amplitude: float | None
    predicted: float
    times: np.ndarray
    trace: np.ndarray


def run_echo_experiment(grid: PhaseGrid, eq: Equilibrium, W: Interaction, schedule: GevreySchedule,
                        k: int, l: int, tau_kick: float, eps: float, kick_ratio: float = 1.0,
                        horizon: float | None = None, dt: float = 0.1, theta_p: float = 1.0,
                        threads: int = 1) -> EchoResult:
    """Two-pulse echo: mode (l - k) at t = 0 with amplitude eps, then an
    impulsive field kick eps * kick_ratio * cos(l x) at tau_kick.

    The echo in mode k is expected at l tau_kick / k; the reported echo is
    the largest local maximum of |rho_k| after the kick.
    """
    if not l > k >= 1:
        raise ParameterError(f'Echo needs l > k >= 1, got k={k}, l={l}')
    predicted = l * tau_kick / k
    if horizon is None:
        horizon = 1.5 * predicted
    step = tau_kick / np.ceil(tau_kick / dt) if tau_kick > 0 else dt
    data = GaussianPerturbation({l - k: eps}, theta_p) if eps else None
    initial = data.real_space(grid) if data else np.zeros(grid.shape)
    kicks = (Kick(tau_kick, l, eps * kick_ratio),) if eps else ()
    setup = SimulationSetup(grid, eq, W, schedule, initial, horizon, dt=step, diagnostics=False,
                            kicks=kicks, threads=threads)
    trajectory = run_simulation(setup)
    trace = trajectory.rho[:, grid.mode_index(k)]
    times = trajectory.times
    mags = np.abs(trace)
    floor = 1e-13 * (1.0 + float(np.max(np.abs(trajectory.rho))))
    after = np.nonzero(times > tau_kick)[0]
    peaks = [i for i in after[1:-1] if mags[i] >= mags[i - 1] and mags[i] > mags[i + 1] and mags[i] > floor]
    if not peaks:
        log.info('No echo detected in mode %d', k)
        return EchoResult(False, None, None, predicted, times, trace)
    best = max(peaks, key=lambda i: mags[i])
    log.info('Echo in mode %d at t=%.4g (predicted %.4g), amplitude %.3e', k, times[best], predicted, mags[best])
    return EchoResult(True, float(times[best]), float(mags[best]), predicted, times, trace)
