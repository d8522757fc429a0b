"""
Homogeneous backgrounds f0(v) and interaction multipliers W(k).

The velocity transform of a background is f0^(eta) = int exp(-i v eta) f0(v) dv,
so a normalized background has f0^(0) = 1.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from math import comb
from typing import Callable

import numpy as np
from numpy.polynomial import hermite_e
from scipy.integrate import trapezoid

from .errors import InadmissibleRadius, ParameterError

log = logging.getLogger(__name__)


def _gaussian_transform_derivative(eta, theta: float, order: int) -> np.ndarray:
    """D_eta^order exp(-theta eta^2 / 2)."""
    eta = np.asarray(eta, dtype=float)
    root = np.sqrt(theta)
    coef = [0.0] * order + [1.0]
    return (-root) ** order * hermite_e.hermeval(root * eta, coef) * np.exp(-0.5 * theta * eta ** 2)


def _gaussian(v, theta: float) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    return np.exp(-0.5 * v ** 2 / theta) / np.sqrt(2 * np.pi * theta)


class Equilibrium:
    """Background distribution with its velocity transform.

    Subclasses provide profile, derivative and transform; the latter
    returns D_eta^order f0^(eta), i.e. the transform of (-i v)^order f0.
    """

    kind = 'abstract'

    def profile(self, v) -> np.ndarray:
        raise NotImplementedError

    def derivative(self, v) -> np.ndarray:
        raise NotImplementedError

    def transform(self, eta, order: int = 0) -> np.ndarray:
        raise NotImplementedError

    def envelope(self, eta) -> np.ndarray:
        """Non-increasing bound on |f0^(u)| for u >= |eta|."""
        raise NotImplementedError

    @property
    def velocity_window(self) -> float:
        """Half-width beyond which the profile is negligible."""
        raise NotImplementedError

    @property
    def symmetric(self) -> bool:
        return True

    def marginal(self, r, k: int) -> np.ndarray:
        """f0_k(r), the background seen along the direction of mode k."""
        return self.profile(np.sign(k) * np.asarray(r, dtype=float))

    def marginal_derivative(self, r, k: int) -> np.ndarray:
        direction = np.sign(k)
        return direction * self.derivative(direction * np.asarray(r, dtype=float))

    def transform_along(self, k: int, u) -> np.ndarray:
        """f0^(k u / |k|), the transform of the marginal."""
        return self.transform(np.sign(k) * np.asarray(u, dtype=float))


class Maxwellian(Equilibrium):
    kind = 'maxwellian'

    def __init__(self, theta: float):
        if not theta > 0:
            raise ParameterError(f'Temperature theta must be positive, got {theta}')
        self.theta = float(theta)

    def __repr__(self) -> str:
        return f'Maxwellian(theta={self.theta})'

    def profile(self, v):
        return _gaussian(v, self.theta)

    def derivative(self, v):
        v = np.asarray(v, dtype=float)
        return -v / self.theta * _gaussian(v, self.theta)

    def transform(self, eta, order: int = 0):
        return _gaussian_transform_derivative(eta, self.theta, order)

    def envelope(self, eta):
        return np.exp(-0.5 * self.theta * np.asarray(eta, dtype=float) ** 2)

    @property
    def velocity_window(self) -> float:
        return 8 * np.sqrt(self.theta)


class TwoStream(Equilibrium):
    """Symmetric pair of Maxwellian beams at +-v0."""

    kind = 'two_stream'

    def __init__(self, v0: float, theta: float):
        if not theta > 0:
            raise ParameterError(f'Temperature theta must be positive, got {theta}')
        self.v0 = float(v0)
        self.theta = float(theta)

    def __repr__(self) -> str:
        return f'TwoStream(v0={self.v0}, theta={self.theta})'

    def profile(self, v):
        v = np.asarray(v, dtype=float)
        return 0.5 * (_gaussian(v - self.v0, self.theta) + _gaussian(v + self.v0, self.theta))

    def derivative(self, v):
        v = np.asarray(v, dtype=float)
        left, right = v - self.v0, v + self.v0
        return -0.5 * (left * _gaussian(left, self.theta) + right * _gaussian(right, self.theta)) / self.theta

    def transform(self, eta, order: int = 0):
        # cos(v0 eta) G(eta) = Re(exp(i v0 eta) G(eta)), differentiated by Leibniz
        eta = np.asarray(eta, dtype=float)
        total = np.zeros(eta.shape, dtype=complex)
        for j in range(order + 1):
            total += comb(order, j) * (1j * self.v0) ** (order - j) \
                * _gaussian_transform_derivative(eta, self.theta, j)
        return np.real(total * np.exp(1j * self.v0 * eta))

    def envelope(self, eta):
        return np.exp(-0.5 * self.theta * np.asarray(eta, dtype=float) ** 2)

    @property
    def velocity_window(self) -> float:
        return 8 * np.sqrt(self.theta) + abs(self.v0)


class Tabulated(Equilibrium):
    """Background given by samples on a uniform velocity table.

    The transform is the trapezoid sum over the table and is treated as
    band-limited to |eta| <= pi / dv_table.
    """

    kind = 'custom'
    _ENVELOPE_SAMPLES = 4096
    # transform samples below this are trapezoid rounding noise
    _NOISE_FLOOR = 1e-15

    def __init__(self, v, f):
        v = np.asarray(v, dtype=float)
        f = np.asarray(f, dtype=float)
        if v.ndim != 1 or v.shape != f.shape or v.size < 8:
            raise ParameterError('Tabulated background needs matching 1D tables of at least 8 points')
        steps = np.diff(v)
        if np.any(steps <= 0) or np.ptp(steps) > 1e-9 * steps[0]:
            raise ParameterError('Velocity table must be uniform and increasing')
        if np.any(f < 0):
            raise ParameterError('Background must be non-negative')
        mass = trapezoid(f, v)
        if not mass > 0:
            raise ParameterError('Background has zero mass')
        if abs(mass - 1.0) > 1e-10:
            log.info('Normalizing tabulated background (mass %.12g)', mass)
            f = f / mass
        self.v = v
        self.f = f
        self.dv = float(steps[0])
        self.band = np.pi / self.dv
        self._weights = np.full(v.size, self.dv)
        self._weights[[0, -1]] *= 0.5
        self._slope = np.gradient(f, v)
        grid = np.linspace(0.0, self.band, self._ENVELOPE_SAMPLES)
        mags = np.abs(self.transform(grid))
        self._envelope_grid = grid
        mags = np.where(mags < self._NOISE_FLOOR, 0.0, mags)
        self._envelope_vals = np.maximum.accumulate(mags[::-1])[::-1]

    def __repr__(self) -> str:
        return f'Tabulated(n={self.v.size}, v=[{self.v[0]}, {self.v[-1]}])'

    def profile(self, v):
        return np.interp(v, self.v, self.f, left=0.0, right=0.0)

    def derivative(self, v):
        return np.interp(v, self.v, self._slope, left=0.0, right=0.0)

    def transform(self, eta, order: int = 0):
        eta = np.asarray(eta, dtype=float)
        flat = eta.ravel()
        coef = self._weights * self.f * (-1j * self.v) ** order
        out = np.zeros(flat.shape, dtype=complex)
        inside = np.nonzero(np.abs(flat) <= self.band)[0]
        for start in range(0, inside.size, 2048):
            idx = inside[start:start + 2048]
            out[idx] = np.exp(-1j * np.outer(flat[idx], self.v)) @ coef
        if self.symmetric_table:
            out = out.real.astype(complex) if order % 2 == 0 else 1j * out.imag
        return out.reshape(eta.shape)

    @property
    def symmetric_table(self) -> bool:
        return bool(np.allclose(self.v, -self.v[::-1]) and np.allclose(self.f, self.f[::-1]))

    @property
    def symmetric(self) -> bool:
        return self.symmetric_table

    def envelope(self, eta):
        eta = np.abs(np.asarray(eta, dtype=float))
        return np.interp(eta, self._envelope_grid, self._envelope_vals, right=0.0)

    @property
    def velocity_window(self) -> float:
        return float(max(abs(self.v[0]), abs(self.v[-1])))


def make_maxwellian(theta: float = 1.0) -> Maxwellian:
    return Maxwellian(theta)


def make_two_stream(v0: float, theta: float = 1.0) -> TwoStream:
    return TwoStream(v0, theta)


def make_custom(v, f) -> Tabulated:
    return Tabulated(v, f)


@dataclass(frozen=True)
class Interaction:
    """Potential multiplier W(k) = sign * A * |k|^(-1-gamma), W(0) = 0.

    A = 0 is the free-transport case.  ``custom`` is an optional
    Schwartz-class profile of |k| replacing |k|^(-1-gamma); it must obey
    the same bound.
    """

    A: float = 1.0
    gamma: float = 1.0
    sign: int = 1
    custom: Callable[[np.ndarray], np.ndarray] | None = None

    def __post_init__(self) -> None:
        if self.A < 0:
            raise ParameterError(f'Interaction amplitude A must be >= 0, got {self.A}')
        if self.gamma < 1:
            raise ParameterError(f'Interaction exponent gamma must be >= 1, got {self.gamma}')
        if self.sign not in (1, -1):
            raise ParameterError(f'Interaction sign must be +1 or -1, got {self.sign}')
        if self.custom is not None:
            k = np.arange(1, 65, dtype=float)
            if np.any(np.abs(self.multiplier(k)) > self.bound(k) * (1 + 1e-12)):
                raise ParameterError('Custom multiplier violates |W(k)| <= A |k|^(-1-gamma)')

    @property
    def kind(self) -> str:
        if self.A == 0:
            return 'free'
        if self.custom is not None:
            return 'custom'
        return 'coulomb' if self.sign > 0 else 'newton'

    @property
    def is_free(self) -> bool:
        return self.A == 0

    @property
    def C_W(self) -> float:
        return self.A

    def multiplier(self, k) -> np.ndarray:
        k = np.abs(np.asarray(k, dtype=float))
        safe = np.where(k == 0, 1.0, k)
        shape = self.custom(safe) if self.custom is not None else safe ** (-1.0 - self.gamma)
        return np.where(k == 0, 0.0, self.sign * self.A * shape)

    def __call__(self, k):
        return self.multiplier(k)

    def bound(self, k) -> np.ndarray:
        k = np.abs(np.asarray(k, dtype=float))
        return self.A * np.where(k == 0, 0.0, np.where(k == 0, 1.0, k) ** (-1.0 - self.gamma))


def coulomb(A: float = 1.0, gamma: float = 1.0) -> Interaction:
    return Interaction(A, gamma, 1)


def newton(A: float = 1.0, gamma: float = 1.0) -> Interaction:
    return Interaction(A, gamma, -1)


def free_transport() -> Interaction:
    return Interaction(0.0)


@dataclass(frozen=True)
class StabilityParams:
    lam_bar: float
    kappa: float
    C0: float
    M: int
    d: int = 1

    def __post_init__(self) -> None:
        for name in ('lam_bar', 'kappa', 'C0'):
            if not getattr(self, name) > 0:
                raise ParameterError(f'{name} must be positive, got {getattr(self, name)}')
        if int(self.M) != self.M or not self.M > self.d / 2:
            raise ParameterError(f'M must be an integer > d/2, got {self.M}')


def _localization_end(eq: Equilibrium, lam_bar: float, M: int, max_level: int) -> float:
    if isinstance(eq, Tabulated):
        return min(2.0 ** max_level, eq.band)
    for level in range(1, max_level + 1):
        start, end = 2.0 ** (level - 1), 2.0 ** level
        with np.errstate(over='ignore', divide='ignore'):
            bound = 2 * np.log(eq.envelope(start)) + 2 * lam_bar * np.sqrt(1 + end ** 2) \
                + 2 * M * np.log(1 + end * (1 + getattr(eq, 'theta', 1.0) + abs(getattr(eq, 'v0', 0.0))))
        if bound < np.log(1e-30):
            return end
    return 2.0 ** max_level


def check_localization(eq: Equilibrium, lam_bar: float, M: int, deta: float = 1.0 / 32,
                       tail_tol: float = 1e-8, max_level: int = 12) -> float:
    """Quadrature value of sum_{alpha <= M} ||v^alpha f0||^2 in G^{lam_bar; 1}.

    The eta integral is accumulated over dyadic blocks |eta| in [2^(j-1), 2^j).
    A non-finite sum, or a last block carrying more than tail_tol of the
    total, means the weighted sum does not converge.

    Raises:
        InadmissibleRadius: the sum diverges for this lam_bar.
    """
    if not lam_bar > 0:
        raise ParameterError(f'lam_bar must be positive, got {lam_bar}')
    end = _localization_end(eq, lam_bar, M, max_level)
    eta = np.arange(0.0, end + 0.5 * deta, deta)
    weight = 2 * lam_bar * np.sqrt(1 + eta ** 2)
    with np.errstate(over='ignore', divide='ignore'):
        density = np.zeros_like(eta)
        for alpha in range(M + 1):
            density += np.exp(2 * np.log(np.abs(eq.transform(eta, alpha))) + weight)
    quad = np.full(eta.size, deta)
    quad[[0, -1]] *= 0.5
    contrib = 2 * quad * density

    edges = [0.0] + [2.0 ** j for j in range(0, int(np.ceil(np.log2(max(end, 1.0)))) + 1)]
    blocks = [float(np.sum(contrib[(eta >= lo) & (eta < hi)])) for lo, hi in zip(edges[:-1], edges[1:])]
    blocks[-1] += float(np.sum(contrib[eta >= edges[-1]]))
    total = float(np.sum(contrib))
    log.debug('Localization blocks for lam_bar=%g: %s', lam_bar, ', '.join(f'{b:.3e}' for b in blocks))
    if not np.isfinite(total) or blocks[-1] > tail_tol * total:
        raise InadmissibleRadius(f'Localization sum for {eq!r} diverges at lam_bar={lam_bar:g} '
                                 f'(outermost dyadic block {blocks[-1]:.3e} of {total:.3e})')
    return total
