"""
Dispersion function, Penrose criterion and the sampled margin of the
half-plane stability condition.

With u = |k| t the dispersion function reads

    L(xi, k) = -W(k) int_0^inf exp(c u) f0^(sgn(k) u) u du,   c = conj(xi),

which is holomorphic in c.  A root of L = 1 makes rho_k grow or decay like
exp(p t) with p = -c |k|; Re p < 0 is damping.
"""
from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field
from typing import NamedTuple

import numpy as np
from numpy.polynomial import legendre
from scipy import integrate, optimize, special

from .equilibria import Equilibrium, Interaction, Maxwellian, TwoStream
from .errors import QuadratureError, ResolutionAlarm
from .parallel import parallel_map

log = logging.getLogger(__name__)

_GL_NODES, _GL_WEIGHTS = legendre.leggauss(16)
_ENVELOPE_FLOOR = 1e-16
_U_MAX = 4096.0
_MAX_PANELS = 1 << 15
NEWTON_MAX_ITER = 50
NEWTON_TOL = 1e-10
BRACKET_POINTS = 4096


def _maxwell_moments(c, theta: float) -> tuple[complex, complex]:
    """I(c) = int_0^inf exp(c u - theta u^2 / 2) u du and dI/dc."""
    scale = np.sqrt(2 * theta)
    j = np.sqrt(np.pi) / scale * special.wofz(-1j * c / scale)
    moment = (1 + c * j) / theta
    return moment, (j + c * moment) / theta


def _closed_moments(eq: Equilibrium, c) -> tuple[complex, complex] | None:
    if isinstance(eq, Maxwellian):
        return _maxwell_moments(c, eq.theta)
    if isinstance(eq, TwoStream):
        up, dup = _maxwell_moments(c + 1j * eq.v0, eq.theta)
        down, ddown = _maxwell_moments(c - 1j * eq.v0, eq.theta)
        return 0.5 * (up + down), 0.5 * (dup + ddown)
    return None


def _panel_integral(func, upper: float, panels: int) -> tuple[complex, float]:
    edges = np.linspace(0.0, upper, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    u = mid[:, None] + half[:, None] * _GL_NODES[None, :]
    values = func(u) * _GL_WEIGHTS[None, :] * half[:, None]
    return complex(np.sum(values)), float(np.sum(np.abs(values)))


def truncation_point(eq: Equilibrium, mu: float, power: int = 1) -> float:
    """Smallest dyadic U with envelope(U) exp(mu U) U^power below 1e-16."""
    upper = 1.0
    while True:
        with np.errstate(over='ignore'):
            size = float(eq.envelope(upper)) * np.exp(mu * upper) * upper ** power
        if size < _ENVELOPE_FLOOR:
            return upper
        upper *= 2
        if upper > _U_MAX:
            raise QuadratureError(f'Dispersion integral does not decay for Re xi = {mu:g} '
                                  f'(envelope still {size:.3e} at u = {_U_MAX:g})')


def laplace_moment(eq: Equilibrium, k: int, c: complex, power: int = 1, tol: float = 1e-13) -> complex:
    """int_0^inf exp(c u) f0^(sgn(k) u) u^power du by composite Gauss-Legendre panels.

    Panels are doubled until successive values agree to tol relative to
    the integral of the modulus.

    Raises:
        QuadratureError: truncation point or panel count out of range.
    """
    upper = truncation_point(eq, float(np.real(c)), power)
    direction = float(np.sign(k))

    def integrand(u):
        return np.exp(c * u) * eq.transform(direction * u) * u ** power

    panels = 8
    prev, _ = _panel_integral(integrand, upper, panels)
    while panels < _MAX_PANELS:
        panels *= 2
        value, mass = _panel_integral(integrand, upper, panels)
        if abs(value - prev) <= tol * max(mass, 1e-300):
            return value
        prev = value
    raise QuadratureError(f'Dispersion quadrature for k={k}, c={c} not converged with {panels} panels')


def _moments(eq: Equilibrium, k: int, c: complex, method: str, derivative: bool = False):
    if method not in ('auto', 'closed', 'quadrature'):
        raise ValueError(f'Unknown dispersion method {method!r}')
    if method != 'quadrature':
        closed = _closed_moments(eq, c)
        if closed is not None:
            return closed if derivative else closed[0]
        if method == 'closed':
            raise ValueError(f'No closed form for {eq!r}')
    value = laplace_moment(eq, k, c, 1)
    if not derivative:
        return value
    return value, laplace_moment(eq, k, c, 2)


def dispersion_function(eq: Equilibrium, W: Interaction, k: int, xi: complex, method: str = 'auto') -> complex:
    """L(xi, k) = -int_0^inf exp(conj(xi) |k| t) f0^(kt) W(k) |k|^2 t dt.

    Args:
        method: 'closed' (Faddeeva form, Maxwellian and two-stream only),
            'quadrature', or 'auto' to prefer the closed form.
    """
    if k == 0:
        raise ValueError('Dispersion function is defined for k != 0')
    wk = float(W.multiplier(k))
    if wk == 0.0:
        return 0j
    return complex(-wk * _moments(eq, k, np.conj(complex(xi)), method))


def axis_value(eq: Equilibrium, W: Interaction, k: int, zeta: float, method: str = 'auto') -> complex:
    """L(i zeta, k) on the imaginary axis.

    Uses the closed form when available, otherwise the Plemelj formula

        L(i zeta, k) = W(k) [p.v. int f0_k'(v) / (v + zeta) dv + i pi f0_k'(-zeta)].
    """
    wk = float(W.multiplier(k))
    if wk == 0.0:
        return 0j
    if method != 'quadrature' and _closed_moments(eq, 0j) is not None:
        return dispersion_function(eq, W, k, 1j * zeta, method)
    return wk * plemelj_integral(eq, k, -zeta)


def plemelj_integral(eq: Equilibrium, k: int, w: float) -> complex:
    """p.v. int f0_k'(r) / (r - w) dr + i pi f0_k'(w)."""
    bound = eq.velocity_window

    def slope(r):
        return eq.marginal_derivative(r, k)

    if -bound < w < bound:
        pv, _ = integrate.quad(slope, -bound, bound, weight='cauchy', wvar=w, limit=400)
    else:
        pv, _ = integrate.quad(lambda r: slope(r) / (r - w), -bound, bound, limit=400)
    return complex(pv, np.pi * float(slope(w)))


# -- Penrose criterion -----------------------------------------------------

@dataclass
class CriticalPoint:
    w: float
    value: float

    @property
    def passed(self) -> bool:
        return self.value < 1.0


@dataclass
class PenroseMode:
    k: int
    W_k: float
    points: list[CriticalPoint] = field(default_factory=list)
    unresolved: list[float] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(p.passed for p in self.points)


@dataclass
class PenroseReport:
    modes: list[PenroseMode]

    @property
    def passed(self) -> bool:
        return all(m.passed for m in self.modes)

    @property
    def unresolved(self) -> bool:
        return any(m.unresolved for m in self.modes)

    def as_dict(self) -> dict:
        out = []
        for m in self.modes:
            entry = asdict(m)
            entry['passed'] = m.passed
            out.append(entry)
        return {'passed': self.passed, 'modes': out}


def critical_points(eq: Equilibrium, k: int, points: int = BRACKET_POINTS) -> tuple[list[float], list[float]]:
    """Zeros of f0_k' on [-v_max, v_max] and suspected tangencies.

    Sign changes on a uniform bracketing grid are refined by Brent's method.
    Local minima of |f0_k'| that come close to zero without a sign change
    are returned as unresolved.
    """
    bound = eq.velocity_window
    r = np.linspace(-bound, bound, points)
    slope = eq.marginal_derivative(r, k)
    profile = eq.marginal(r, k)
    vacuum = profile <= 1e-14 * np.max(profile)
    scale = np.max(np.abs(slope))

    found = []
    for i in range(points - 1):
        if vacuum[i] and vacuum[i + 1]:
            continue
        a, b = slope[i], slope[i + 1]
        if a == 0.0:
            found.append(float(r[i]))
        elif a * b < 0:
            found.append(optimize.brentq(lambda x: float(eq.marginal_derivative(x, k)), r[i], r[i + 1],
                                         xtol=1e-14, rtol=1e-14))

    mags = np.abs(slope)
    suspects = []
    for i in range(1, points - 1):
        if vacuum[i] or slope[i] == 0.0:
            continue
        if mags[i] <= mags[i - 1] and mags[i] <= mags[i + 1] and mags[i] < 1e-6 * scale \
                and slope[i - 1] * slope[i + 1] > 0:
            suspects.append(float(r[i]))
    return found, suspects


def penrose_check(eq: Equilibrium, W: Interaction, k_set) -> PenroseReport:
    """Evaluate W(k) p.v. int f0_k'(r) / (r - w) dr at every critical point w.

    The criterion holds when all values are below 1.
    """
    modes = []
    for k in k_set:
        wk = float(W.multiplier(k))
        points, suspects = critical_points(eq, k)
        mode = PenroseMode(int(k), wk, unresolved=suspects)
        for w in points:
            mode.points.append(CriticalPoint(w, wk * principal_value(eq, k, w)))
        if suspects:
            log.warning('Mode %d: unresolved critical points near %s', k, ', '.join(f'{s:.6g}' for s in suspects))
        log.debug('Mode %d: %d critical points, passed=%s', k, len(points), mode.passed)
        modes.append(mode)
    return PenroseReport(modes)


def principal_value(eq: Equilibrium, k: int, w: float, delta: float = 1e-4) -> float:
    """p.v. int f0_k'(r) / (r - w) dr at a zero w of f0_k'.

    The integrand is regular at w; the interval [w - delta, w + delta] is
    excised symmetrically and replaced by 2 delta times its midpoint value.
    """
    bound = eq.velocity_window

    def integrand(r):
        return float(eq.marginal_derivative(r, k)) / (r - w)

    left, _ = integrate.quad(integrand, -bound, w - delta, limit=400)
    right, _ = integrate.quad(integrand, w + delta, bound, limit=400)
    middle = 0.5 * (integrand(w - delta) + integrand(w + delta))
    return left + right + 2 * delta * middle


# -- scans, roots and the margin -------------------------------------------

@dataclass
class DispersionScan:
    k: int
    mu: np.ndarray
    zeta: np.ndarray
    values: np.ndarray
    winding: int | None = None

    @property
    def distance(self) -> np.ndarray:
        return np.abs(self.values - 1.0)

    @property
    def margin(self) -> float:
        return float(np.min(self.distance))

    @property
    def argmin(self) -> complex:
        i, j = np.unravel_index(np.argmin(self.distance), self.values.shape)
        return complex(self.mu[i], self.zeta[j])


def scan_dispersion(eq: Equilibrium, W: Interaction, k: int, mu, zeta, method: str = 'auto') -> DispersionScan:
    mu = np.asarray(mu, dtype=float)
    zeta = np.asarray(zeta, dtype=float)
    values = np.empty((mu.size, zeta.size), dtype=complex)
    for i, m in enumerate(mu):
        for j, z in enumerate(zeta):
            values[i, j] = dispersion_function(eq, W, k, complex(m, z), method)
    return DispersionScan(int(k), mu, zeta, values)


def winding_number(eq: Equilibrium, W: Interaction, k: int, Z: float, n_zeta: int) -> int:
    """Winding of zeta -> L(i zeta, k) - 1 about 0 over [-Z, Z].

    Raises:
        ResolutionAlarm: an argument increment exceeds pi/2.
    """
    zeta = np.linspace(-Z, Z, n_zeta)
    curve = np.array([axis_value(eq, W, k, z) for z in zeta]) - 1.0
    steps = np.angle(curve[1:] / curve[:-1])
    if np.any(np.abs(steps) > np.pi / 2):
        raise ResolutionAlarm(f'Winding contour for k={k} under-resolved: argument jump '
                              f'{np.max(np.abs(steps)):.3f} > pi/2; increase n_zeta')
    # close the contour through the far field, where L - 1 -> -1
    closing = np.angle(curve[0] / curve[-1])
    total = (np.sum(steps) + closing) / (2 * np.pi)
    winding = int(round(total))
    if abs(total - winding) > 0.1:
        log.warning('Winding for k=%d is %.3f, far from an integer; increase Z', k, total)
    return winding


class DispersionRoot(NamedTuple):
    k: int
    xi: complex
    residual: float
    iterations: int

    @property
    def exponent(self) -> complex:
        """p with rho_k ~ exp(p t)."""
        return -np.conj(self.xi) * abs(self.k)

    @property
    def damped(self) -> bool:
        return self.exponent.real < 0


def newton_root(eq: Equilibrium, W: Interaction, k: int, xi0: complex, method: str = 'auto',
                max_iter: int = NEWTON_MAX_ITER, tol: float = NEWTON_TOL) -> DispersionRoot | None:
    """Newton iteration for L(xi, k) = 1 from xi0; None if not converged."""
    wk = float(W.multiplier(k))
    if wk == 0.0:
        return None
    c = np.conj(complex(xi0))
    for iteration in range(1, max_iter + 1):
        try:
            value, slope = _moments(eq, k, c, method, derivative=True)
        except QuadratureError as exc:
            log.debug('Newton seed %s for k=%d left the convergence region: %s', xi0, k, exc)
            return None
        residual = -wk * value - 1.0
        if abs(residual) < tol:
            return DispersionRoot(int(k), complex(np.conj(c)), float(abs(residual)), iteration - 1)
        if slope == 0:
            return None
        c = c - residual / (-wk * slope)
        if not np.isfinite(c):
            return None
    return None


def _local_minima(values: np.ndarray) -> list[tuple[int, int]]:
    padded = np.pad(values, 1, constant_values=np.inf)
    centre = padded[1:-1, 1:-1]
    is_min = np.ones(values.shape, dtype=bool)
    for di in (-1, 0, 1):
        for dj in (-1, 0, 1):
            if di or dj:
                is_min &= centre <= padded[1 + di:padded.shape[0] - 1 + di, 1 + dj:padded.shape[1] - 1 + dj]
    idx = np.argwhere(is_min)
    return sorted(map(tuple, idx), key=lambda ij: values[ij])


def find_dispersion_roots(eq: Equilibrium, W: Interaction, k: int, mu=(-2.0, 2.0), Z: float = 8.0,
                          n_mu: int = 41, n_zeta: int = 81, max_seeds: int = 12,
                          method: str = 'auto') -> list[DispersionRoot]:
    """Roots of L(xi, k) = 1 seeded from local minima of |L - 1| on a scan box.

    Seeds whose Newton iteration does not converge are logged and skipped.
    """
    if float(W.multiplier(k)) == 0.0:
        return []
    scan = scan_dispersion(eq, W, k, np.linspace(*mu, n_mu), np.linspace(-Z, Z, n_zeta), method)
    roots: list[DispersionRoot] = []
    for i, j in _local_minima(scan.distance)[:max_seeds]:
        seed = complex(scan.mu[i], scan.zeta[j])
        root = newton_root(eq, W, k, seed, method)
        if root is None:
            log.warning('Newton from seed %s (k=%d) did not converge in %d iterations',
                        seed, k, NEWTON_MAX_ITER)
            continue
        if all(abs(root.xi - r.xi) > 1e-8 for r in roots):
            roots.append(root)
    return sorted(roots, key=lambda r: (r.xi.real, r.xi.imag))


@dataclass
class MarginReport:
    """Sampled margin of |L - 1| over the scan box with tail bounds.

    Tail bounds are upper bounds on |L| outside the box: large |zeta|,
    large |k| and Re xi below mu_min.  The margin is "sampled", never
    certified.
    """

    kappa: float
    argmin_k: int
    argmin_xi: complex
    zeta_tail: float
    k_tail: float
    mu_tail: float
    root: DispersionRoot | None
    windings: dict[int, int]
    label: str = 'sampled'

    @property
    def stable(self) -> bool:
        return self.kappa > 0

    def as_dict(self) -> dict:
        return {
            'kappa': self.kappa,
            'argmin': {'k': self.argmin_k, 'mu': self.argmin_xi.real, 'zeta': self.argmin_xi.imag},
            'tails': {'zeta': self.zeta_tail, 'k': self.k_tail, 'mu': self.mu_tail},
            'root': None if self.root is None else {'k': self.root.k, 'mu': self.root.xi.real,
                                                    'zeta': self.root.xi.imag},
            'windings': {str(k): w for k, w in self.windings.items()},
            'label': self.label,
        }


def _weighted_integral(eq: Equilibrium, rate: float, func) -> float:
    upper = truncation_point(eq, rate, 2)
    u = np.linspace(0.0, upper, int(upper * 64) + 1)
    return float(integrate.trapezoid(np.exp(rate * u) * func(u), u))


def tail_bounds(eq: Equilibrium, W: Interaction, lam_bar: float, k_max: int, Z: float,
                mu_min: float) -> tuple[float, float, float]:
    """Bounds on sup |L| beyond |zeta| = Z, |k| = k_max and Re xi = mu_min.

    Integration by parts gives |L| <= |W(k)| B / |zeta| with
    B = int exp(lam_bar u) |d/du (f0^(u) u)| du.
    """
    zeta_tail = k_tail = mu_tail = 0.0
    strength = max(abs(float(W.multiplier(k))) for k in range(1, k_max + 1))
    for direction in (1, -1):
        def mag(u):
            return np.abs(eq.transform(direction * u)) * u

        def slope(u):
            return np.abs(eq.transform(direction * u) + direction * u * eq.transform(direction * u, 1))

        zeta_tail = max(zeta_tail, strength * _weighted_integral(eq, lam_bar, slope) / Z)
        k_tail = max(k_tail, float(W.bound(k_max + 1)) * _weighted_integral(eq, lam_bar, mag))
        mu_tail = max(mu_tail, strength * _weighted_integral(eq, mu_min, mag))
    return zeta_tail, k_tail, mu_tail


def condition_L_margin(eq: Equilibrium, W: Interaction, lam_bar: float = 0.05, k_max: int = 8,
                       Z: float = 8.0, mu_min: float = -2.0, n_mu: int = 16, n_zeta: int = 257,
                       kappa_min: float = 1e-3, winding: bool = True, threads: int = 1) -> MarginReport:
    """Minimum of |L(xi, k) - 1| over mu in [mu_min, lam_bar), |zeta| <= Z, 1 <= |k| <= k_max.

    The arg-min is polished by Newton; a root of L = 1 inside the box
    gives kappa = 0.
    """
    mu = np.linspace(mu_min, lam_bar, n_mu, endpoint=False)
    zeta = np.linspace(-Z, Z, n_zeta)
    modes = [k for m in range(1, k_max + 1) for k in (m, -m)]

    def scan_mode(k):
        scan = scan_dispersion(eq, W, k, mu, zeta)
        if winding and float(W.multiplier(k)) != 0.0:
            scan.winding = winding_number(eq, W, k, Z, n_zeta)
        return scan

    scans = parallel_map(scan_mode, modes, threads)
    best = min(scans, key=lambda s: s.margin)
    kappa = best.margin
    root = newton_root(eq, W, best.k, best.argmin)
    if root is not None and mu_min <= root.xi.real < lam_bar and abs(root.xi.imag) <= Z:
        log.info('Root of L = 1 inside the scan box at xi = %s (k=%d)', root.xi, root.k)
        kappa = 0.0
    else:
        root = None
    zeta_tail, k_tail, mu_tail = tail_bounds(eq, W, lam_bar, k_max, Z, mu_min)
    if kappa < kappa_min:
        log.warning('Sampled margin %.3e is below kappa_min %.3e: condition (L) likely fails', kappa, kappa_min)
    return MarginReport(kappa, best.k, best.argmin, zeta_tail, k_tail, mu_tail, root,
                        {s.k: s.winding for s in scans if s.winding is not None})
