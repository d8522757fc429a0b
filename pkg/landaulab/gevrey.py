"""
Gevrey radius schedule, the multiplier A and the weighted norms built on it.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import GridError, ParameterError, SubcriticalExponentError
from .grid import FieldSpectrum, velocity_samples, velocity_spectrum

log = logging.getLogger(__name__)

DEFAULT_LOG_CAP = 700.0


def japanese(k, eta) -> np.ndarray:
    """<k, eta> = (1 + (|k| + |eta|)^2)^(1/2)."""
    return np.sqrt(1.0 + (np.abs(k) + np.abs(eta)) ** 2)


@dataclass(frozen=True)
class GevreySchedule:
    """Parameters of the time-dependent Gevrey weight.

    ``gamma`` is the exponent of the attached interaction; it fixes the
    decay exponent a of the radius.  ``a_override`` replaces the formula
    for a (used by sub-critical kernel sweeps, never by the simulator).
    """

    s: float
    lambda0: float
    lambda_prime: float
    sigma: float = 0.0
    beta: float = 3.0
    M: int = 1
    gamma: float = 1.0
    a_override: float | None = None

    def __post_init__(self) -> None:
        if not 0 < self.s < 1:
            raise ParameterError(f'Gevrey exponent s must lie in (0, 1), got {self.s}')
        if not self.lambda0 > self.lambda_prime > 0:
            raise ParameterError(f'Need lambda0 > lambda_prime > 0, got {self.lambda0}, {self.lambda_prime}')
        if self.sigma < 0:
            raise ParameterError(f'Sobolev correction sigma must be >= 0, got {self.sigma}')
        if not self.beta > 2:
            raise ParameterError(f'beta must exceed 2, got {self.beta}')
        if int(self.M) != self.M or self.M < 1:
            raise ParameterError(f'Moment order M must be an integer > d/2, got {self.M}')

    @property
    def alpha0(self) -> float:
        return 0.5 * (self.lambda0 + self.lambda_prime)

    @property
    def critical_s(self) -> float:
        return 1.0 / (2.0 + self.gamma)

    @property
    def a(self) -> float:
        if self.a_override is not None:
            return self.a_override
        return ((2.0 + self.gamma) * self.s - 1.0) / (1.0 + self.gamma)

    @property
    def surrogate(self) -> bool:
        return self.a_override is not None

    def with_exponent(self, a0: float) -> GevreySchedule:
        """Same schedule with the decay exponent fixed to a0."""
        return GevreySchedule(self.s, self.lambda0, self.lambda_prime, self.sigma,
                              self.beta, self.M, self.gamma, a0)


class Radius(NamedTuple):
    value: float
    rate: float


def _exponent(schedule: GevreySchedule) -> float:
    a = schedule.a
    if a <= 0:
        raise SubcriticalExponentError(
            f's = {schedule.s} does not exceed 1/(2+gamma) = {schedule.critical_s:.6g} '
            f'(radius exponent a = {a:.6g})')
    return a


def lambda_at(schedule: GevreySchedule, t, side: str = 'right') -> Radius:
    """Radius lambda(t) and its one-sided time derivative.

    lambda(t) = (lambda0 - lambda')(1 - t)_+ / 8 + alpha0
                + (lambda0 - lambda') min(1, t^-a) / 4

    Both parts are smooth except at t = 1; side selects which one-sided
    derivative is returned there.  Accepts scalars or arrays.
    """
    a = _exponent(schedule)
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ParameterError('lambda(t) is defined for t >= 0 only')
    gap = schedule.lambda0 - schedule.lambda_prime
    value = gap / 8 * np.maximum(1.0 - t, 0.0) + schedule.alpha0 + gap / 4 * np.maximum(t, 1.0) ** (-a)
    early = -gap / 8 * np.ones_like(t)
    late = -a * gap / 4 * np.maximum(t, 1.0) ** (-a - 1)
    if side == 'left':
        rate = np.where(t <= 1.0, early, late)
    elif side == 'right':
        rate = np.where(t < 1.0, early, late)
    else:
        raise ValueError(f"side must be 'left' or 'right', got {side!r}")
    if value.ndim == 0:
        return Radius(float(value), float(rate))
    return Radius(value, rate)


def lambda_kink(schedule: GevreySchedule) -> tuple[float, float]:
    """Left and right derivative of lambda at t = 1."""
    return lambda_at(schedule, 1.0, 'left').rate, lambda_at(schedule, 1.0, 'right').rate


def log_weight(lam, s: float, sigma: float, k, eta) -> np.ndarray:
    """log of exp(lam <k,eta>^s) <k,eta>^sigma."""
    bracket = japanese(k, eta)
    return lam * bracket ** s + sigma * np.log(bracket)


class Weights(NamedTuple):
    values: np.ndarray
    capped: int


def capped_exp(logs, log_cap: float = DEFAULT_LOG_CAP) -> Weights:
    """exp of logs with entries above log_cap clamped and counted."""
    logs = np.asarray(logs, dtype=float)
    over = logs > log_cap
    capped = int(np.count_nonzero(over))
    if capped:
        log.warning('%d weight entries exceed log-cap %g and were capped', capped, log_cap)
    return Weights(np.exp(np.minimum(logs, log_cap)), capped)


def gevrey_log_weight(schedule: GevreySchedule, t: float, k, eta, sigma_shift: float = 0.0):
    lam = lambda_at(schedule, t).value
    return log_weight(lam, schedule.s, schedule.sigma + sigma_shift, k, eta)


def gevrey_weight_report(schedule: GevreySchedule, t: float, k, eta, sigma_shift: float = 0.0,
                         log_cap: float = DEFAULT_LOG_CAP) -> Weights:
    """A^(sigma_shift)_k(t, eta) together with the number of capped entries."""
    return capped_exp(gevrey_log_weight(schedule, t, k, eta, sigma_shift), log_cap)


def gevrey_weight(schedule: GevreySchedule, t: float, k, eta, sigma_shift: float = 0.0,
                  log_cap: float = DEFAULT_LOG_CAP):
    """A^(sigma_shift)_k(t, eta) = exp(lambda(t) <k,eta>^s) <k,eta>^(sigma + sigma_shift).

    Computed in log space; entries whose log exceeds log_cap are clamped
    and reported through the module logger.  Use gevrey_weight_report to
    see how many were capped.
    """
    values = gevrey_weight_report(schedule, t, k, eta, sigma_shift, log_cap).values
    return float(values) if values.ndim == 0 else values


def velocity_moment(spec: FieldSpectrum, order: int) -> np.ndarray:
    """Coefficients of v^order f, i.e. D_eta^order applied to the spectrum."""
    if order == 0:
        return spec.coeffs
    grid = spec.grid
    samples = velocity_samples(grid, spec.coeffs)
    return velocity_spectrum(grid, samples * grid.v[None, :] ** order)


class NormValue(NamedTuple):
    value: float
    capped: int


def weighted_norm(spec: FieldSpectrum, logw: np.ndarray, moment_order: int = 0,
                  log_cap: float = DEFAULT_LOG_CAP) -> NormValue:
    """(sum_{alpha <= moment_order} sum_k int |w v^alpha f|^2 deta)^(1/2) for w = exp(logw)."""
    weights, capped = capped_exp(logw, log_cap)
    total = 0.0
    for alpha in range(moment_order + 1):
        total += float(np.sum(np.abs(weights * velocity_moment(spec, alpha)) ** 2))
    return NormValue(float(np.sqrt(total * spec.grid.deta)), capped)


def _check_frame(spec: FieldSpectrum, t: float) -> None:
    if spec.frame.kind == 'gliding' and abs(spec.frame.t - t) > 1e-12 * max(1.0, abs(t)):
        raise GridError(f'Spectrum in frame {spec.frame} evaluated with weights at t={t:g}')


def gevrey_norm_report(spec: FieldSpectrum, schedule: GevreySchedule, t: float,
                       sigma_shift: float = 0.0, moment_order: int = 0,
                       log_cap: float = DEFAULT_LOG_CAP) -> NormValue:
    if moment_order > schedule.M:
        raise ParameterError(f'moment order {moment_order} exceeds M = {schedule.M}')
    _check_frame(spec, t)
    grid = spec.grid
    logw = gevrey_log_weight(schedule, t, grid.modes[:, None], grid.etas[None, :], sigma_shift)
    return weighted_norm(spec, logw, moment_order, log_cap)


def gevrey_norm(spec: FieldSpectrum, schedule: GevreySchedule, t: float,
                sigma_shift: float = 0.0, moment_order: int = 0,
                log_cap: float = DEFAULT_LOG_CAP) -> float:
    """Moment-weighted Gevrey norm with the multiplier A^(sigma_shift) at time t.

    Args:
        spec: spectrum; a gliding spectrum must be in the frame of time t.
        schedule: radius schedule.
        t: time of the weight.
        sigma_shift: Sobolev shift of A.
        moment_order: highest velocity moment |alpha|, at most schedule.M.
    """
    return gevrey_norm_report(spec, schedule, t, sigma_shift, moment_order, log_cap).value


def radius_norm(spec: FieldSpectrum, lam: float, s: float, sigma: float = 0.0) -> float:
    """Norm in G^{lam, sigma; s} for a fixed radius lam."""
    grid = spec.grid
    return weighted_norm(spec, log_weight(lam, s, sigma, grid.modes[:, None], grid.etas[None, :])).value


def sobolev_norm(spec: FieldSpectrum, order: float) -> float:
    """H^order norm: weight <k, eta>^order, no exponential part."""
    return radius_norm(spec, 0.0, 1.0, order)


def density_norm(modes, rho, schedule: GevreySchedule, t: float, sigma_shift: float = 0.0,
                 log_cap: float = DEFAULT_LOG_CAP) -> float:
    """F-norm of a density slice: weights evaluated at eta = kt.

    Args:
        modes: nonzero modes k.
        rho: rho_k(t) for those modes.
    """
    modes = np.asarray(modes)
    rho = np.asarray(rho)
    if np.any(modes == 0):
        raise ParameterError('density_norm takes nonzero modes only (mean-zero density)')
    if not np.any(rho):
        return 0.0
    logw = gevrey_log_weight(schedule, t, modes, modes * t, sigma_shift)
    weights = capped_exp(logw, log_cap).values
    return float(np.sqrt(np.sum(np.abs(weights * rho) ** 2)))
