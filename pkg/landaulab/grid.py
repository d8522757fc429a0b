"""
Phase-space grids on T x [-V, V), joint (k, eta) spectra and the change
between the lab frame and the gliding frame z = x - vt.

Spectra use the joint transform

    h_k(eta) = (2 pi)^-1 int int exp(-i k x - i v eta) h(x, v) dx dv

approximated by a 2D FFT, so that the density is rho_k = h_k(0) and
the velocity transform of a normalized background is 1 at eta = 0.
Coefficient arrays are stored in fftshift order: row i holds mode
k = i - Nx/2 and column j holds eta = (j - Nv/2) * deta.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from typing import Literal

import numpy as np
import scipy.fft

from .errors import AlignmentError, GridError, ResolutionAlarm

log = logging.getLogger(__name__)

TORUS_LENGTH = 2 * np.pi


def _is_power_of_two(n) -> bool:
    return isinstance(n, (int, np.integer)) and n > 0 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class PhaseGrid:
    """Uniform discretization of the torus of side 2 pi times [-V, V)."""

    Nx: int
    Nv: int
    V: float
    d: int = 1

    def __post_init__(self) -> None:
        if self.d != 1:
            raise GridError(f'Dimension d={self.d} is not supported, only d=1')
        for name in ('Nx', 'Nv'):
            n = getattr(self, name)
            if not _is_power_of_two(n) or n < 8:
                raise GridError(f'{name} must be a power of two >= 8, got {n}')
        if not self.V > 0:
            raise GridError(f'Velocity half-width V must be positive, got {self.V}')

    @property
    def shape(self) -> tuple[int, int]:
        return (self.Nx, self.Nv)

    @property
    def dx(self) -> float:
        return TORUS_LENGTH / self.Nx

    @property
    def dv(self) -> float:
        return 2 * self.V / self.Nv

    @property
    def deta(self) -> float:
        return np.pi / self.V

    @property
    def eta_max(self) -> float:
        return np.pi * self.Nv / (2 * self.V)

    @property
    def x(self) -> np.ndarray:
        return np.arange(self.Nx) * self.dx

    @property
    def v(self) -> np.ndarray:
        return -self.V + np.arange(self.Nv) * self.dv

    @property
    def modes(self) -> np.ndarray:
        return np.arange(-self.Nx // 2, self.Nx // 2)

    @property
    def etas(self) -> np.ndarray:
        return np.arange(-self.Nv // 2, self.Nv // 2) * self.deta

    def mode_index(self, k: int) -> int:
        if not -self.Nx // 2 <= k < self.Nx // 2:
            raise GridError(f'Mode {k} outside the grid range [{-self.Nx // 2}, {self.Nx // 2})')
        return int(k) + self.Nx // 2

    def eta_steps(self, value: float) -> int:
        """Number of lattice steps deta in value; raises AlignmentError if not integral."""
        steps = value / self.deta
        nearest = round(steps)
        if abs(steps - nearest) > 1e-9 * max(1.0, abs(steps)):
            raise AlignmentError(f'{value} is not a multiple of deta = {self.deta}')
        return int(nearest)

    def is_aligned(self, t: float) -> bool:
        try:
            self.eta_steps(t)
        except AlignmentError:
            return False
        return True

    def eta_index(self, eta: float) -> int:
        """Column index of eta; raises if eta is off the lattice or out of range."""
        j = self.eta_steps(eta) + self.Nv // 2
        if not 0 <= j < self.Nv:
            raise GridError(f'eta = {eta} outside the lattice range [-{self.eta_max}, {self.eta_max})')
        return j

    def validity_horizon(self, k_max: int) -> float:
        """Time after which mode k_max filaments beyond eta_max."""
        return self.eta_max / abs(k_max)

    def recurrence_time(self, k: int = 1) -> float:
        return TORUS_LENGTH / (abs(k) * self.dv)

    def bracket(self) -> np.ndarray:
        """|Xi| = |k| + |eta| on the lattice (l1 joint frequency)."""
        return np.abs(self.modes)[:, None] + np.abs(self.etas)[None, :]


@dataclass(frozen=True)
class Frame:
    kind: Literal['lab', 'gliding'] = 'lab'
    t: float = 0.0

    def __str__(self) -> str:
        if self.kind == 'lab':
            return 'lab'
        return f'gliding(t={self.t:g})'


LAB = Frame()


def gliding(t: float) -> Frame:
    return Frame('gliding', float(t))


@dataclass(frozen=True, eq=False)
class FieldSpectrum:
    """Complex coefficients over the (k, eta) lattice of a PhaseGrid."""

    grid: PhaseGrid
    coeffs: np.ndarray
    frame: Frame = LAB
    dropped_mass: float = 0.0

    def __post_init__(self) -> None:
        if self.coeffs.shape != self.grid.shape:
            raise GridError(f'Coefficient array of shape {self.coeffs.shape} does not match '
                            f'grid {self.grid.shape}')

    @staticmethod
    def zeros(grid: PhaseGrid, frame: Frame = LAB) -> FieldSpectrum:
        return FieldSpectrum(grid, np.zeros(grid.shape, dtype=complex), frame)

    def with_coeffs(self, coeffs: np.ndarray) -> FieldSpectrum:
        return replace(self, coeffs=coeffs, dropped_mass=0.0)

    def check_compatible(self, other: FieldSpectrum) -> None:
        if self.grid != other.grid:
            raise GridError(f'Spectra live on different grids: {self.grid} vs {other.grid}')
        if self.frame != other.frame:
            raise GridError(f'Spectra live in different frames: {self.frame} vs {other.frame}')

    def __add__(self, other: FieldSpectrum) -> FieldSpectrum:
        self.check_compatible(other)
        return self.with_coeffs(self.coeffs + other.coeffs)

    def __sub__(self, other: FieldSpectrum) -> FieldSpectrum:
        self.check_compatible(other)
        return self.with_coeffs(self.coeffs - other.coeffs)

    def scaled(self, factor: complex) -> FieldSpectrum:
        return self.with_coeffs(self.coeffs * factor)

    def mode(self, k: int) -> np.ndarray:
        return self.coeffs[self.grid.mode_index(k)]

    def l2_norm(self) -> float:
        """(sum_k int |c_k(eta)|^2 deta)^(1/2) as a Riemann sum."""
        return float(np.sqrt(np.sum(np.abs(self.coeffs) ** 2) * self.grid.deta))

    def density(self) -> np.ndarray:
        """rho_k for every grid mode.

        In the lab frame this is the eta = 0 column; in the gliding frame at
        time t it is read at eta = kt, which is on the lattice because t is
        aligned.  Entries whose kt falls outside the lattice are 0.
        """
        grid = self.grid
        centre = grid.Nv // 2
        if self.frame.kind == 'lab':
            return self.coeffs[:, centre].copy()
        steps = grid.eta_steps(self.frame.t)
        cols = centre + grid.modes * steps
        inside = (cols >= 0) & (cols < grid.Nv)
        rho = np.zeros(grid.Nx, dtype=complex)
        rows = np.nonzero(inside)[0]
        rho[rows] = self.coeffs[rows, cols[rows]]
        return rho

    def reality_defect(self) -> float:
        """Relative violation of c(-k, -eta) = conj(c(k, eta)).

        The unpaired Nyquist row and column are left out.
        """
        inner = self.coeffs[1:, 1:]
        mirror = np.conj(inner[::-1, ::-1])
        scale = np.max(np.abs(inner))
        if scale == 0:
            return 0.0
        return float(np.max(np.abs(inner - mirror)) / scale)

    def is_mean_zero(self, rtol: float = 1e-12) -> bool:
        """Whether rho_0 vanishes relative to the scale of the k = 0 row."""
        row = self.coeffs[self.grid.Nx // 2]
        scale = np.max(np.abs(row))
        if scale == 0:
            return True
        return bool(abs(self.density()[self.grid.Nx // 2]) <= rtol * scale)


def _eta_signs(grid: PhaseGrid) -> np.ndarray:
    m = np.arange(-grid.Nv // 2, grid.Nv // 2)
    return np.where(m % 2 == 0, 1.0, -1.0)


def from_real_space(grid: PhaseGrid, h: np.ndarray, frame: Frame = LAB,
                    workers: int | None = None) -> FieldSpectrum:
    """Joint spectrum of samples h[x_n, v_j]."""
    if h.shape != grid.shape:
        raise GridError(f'Samples of shape {h.shape} do not match grid {grid.shape}')
    raw = scipy.fft.fftshift(scipy.fft.fft2(h, workers=workers))
    coeffs = raw * (grid.dv / grid.Nx) * _eta_signs(grid)[None, :]
    return FieldSpectrum(grid, coeffs, frame)


def to_real_space(spec: FieldSpectrum, workers: int | None = None) -> np.ndarray:
    """Inverse of from_real_space; returns complex samples."""
    grid = spec.grid
    raw = spec.coeffs * _eta_signs(grid)[None, :] * (grid.Nx / grid.dv)
    return scipy.fft.ifft2(scipy.fft.ifftshift(raw), workers=workers)


def velocity_samples(grid: PhaseGrid, coeffs: np.ndarray, workers: int | None = None) -> np.ndarray:
    """Inverse velocity transform of (..., eta) rows back to (..., v) samples."""
    raw = coeffs * _eta_signs(grid) / grid.dv
    return scipy.fft.ifft(scipy.fft.ifftshift(raw, axes=-1), axis=-1, workers=workers)


def velocity_spectrum(grid: PhaseGrid, samples: np.ndarray, workers: int | None = None) -> np.ndarray:
    """Velocity transform of (..., v) samples to (..., eta) coefficients."""
    raw = scipy.fft.fftshift(scipy.fft.fft(samples, axis=-1, workers=workers), axes=-1)
    return raw * grid.dv * _eta_signs(grid)


def _shift_rows(coeffs: np.ndarray, shifts: np.ndarray) -> tuple[np.ndarray, float]:
    """out[i, m] = coeffs[i, m - shifts[i]], dropping what leaves the lattice."""
    out = np.zeros_like(coeffs)
    nv = coeffs.shape[1]
    dropped = 0.0
    for i, s in enumerate(shifts):
        row = coeffs[i]
        if s == 0:
            out[i] = row
            continue
        if abs(s) >= nv:
            lost = row
        elif s > 0:
            out[i, s:] = row[:nv - s]
            lost = row[nv - s:]
        else:
            out[i, :nv + s] = row[-s:]
            lost = row[:-s]
        dropped += float(np.vdot(lost, lost).real)
    return out, dropped


def _check_dropped(spec: FieldSpectrum, dropped: float, max_dropped: float | None) -> None:
    if dropped == 0.0:
        return
    total = dropped + float(np.sum(np.abs(spec.coeffs) ** 2)) * spec.grid.deta
    log.debug('Frame change at t=%g dropped l2 mass %.3e of %.3e', spec.frame.t, dropped, total)
    if max_dropped is not None and dropped > max_dropped * total:
        raise ResolutionAlarm(f'Filamentation left the eta lattice at t={spec.frame.t:g}: '
                              f'dropped mass fraction {dropped / total:.3e} exceeds {max_dropped:g}; '
                              'raise eta_max')


def to_gliding(spec: FieldSpectrum, t: float, max_dropped: float | None = None) -> FieldSpectrum:
    """Gliding spectrum f_k(eta) = h_k(eta - kt) of a lab-frame spectrum.

    Args:
        spec: lab-frame spectrum.
        t: time, a multiple of deta.
        max_dropped: if given, raise ResolutionAlarm when the relative
            l2 mass shifted off the lattice exceeds it.

    Returns:
        gliding-frame FieldSpectrum whose dropped_mass holds the discarded
        (deta-weighted) l2 mass.
    """
    if spec.frame.kind != 'lab':
        raise GridError(f'to_gliding expects a lab-frame spectrum, got {spec.frame}')
    grid = spec.grid
    steps = grid.eta_steps(t)
    coeffs, dropped = _shift_rows(spec.coeffs, grid.modes * steps)
    out = FieldSpectrum(grid, coeffs, gliding(t), dropped * grid.deta)
    _check_dropped(out, out.dropped_mass, max_dropped)
    return out


def from_gliding(spec: FieldSpectrum, max_dropped: float | None = None) -> FieldSpectrum:
    """Inverse of to_gliding."""
    if spec.frame.kind != 'gliding':
        raise GridError(f'from_gliding expects a gliding-frame spectrum, got {spec.frame}')
    grid = spec.grid
    steps = grid.eta_steps(spec.frame.t)
    coeffs, dropped = _shift_rows(spec.coeffs, -grid.modes * steps)
    out = FieldSpectrum(grid, coeffs, LAB, dropped * grid.deta)
    _check_dropped(out, out.dropped_mass, max_dropped)
    return out
