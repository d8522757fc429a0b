"""
Littlewood-Paley decomposition on the (k, eta) lattice and the
paraproduct splitting of products.

Shells are radial in the l1 frequency |Xi| = |k| + |eta|.  The profile
chi is a C-infinity step equal to 1 on [0, 1/2] and 0 on [3/4, inf);
psi = chi(|Xi|) and phi_N = chi(|Xi|/(2N)) - chi(|Xi|/N) for dyadic
N >= 1, so psi + sum_N phi_N telescopes to 1 on the grid.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .grid import FieldSpectrum, PhaseGrid, from_real_space, to_real_space

log = logging.getLogger(__name__)

LOW = 0.5


def _transition(x: np.ndarray) -> np.ndarray:
    pos = x > 0
    return np.where(pos, np.exp(-1.0 / np.where(pos, x, 1.0)), 0.0)


def chi(r) -> np.ndarray:
    """Smooth radial step: 1 for r <= 1/2, 0 for r >= 3/4."""
    x = np.clip((np.asarray(r, dtype=float) - 0.5) * 4.0, 0.0, 1.0)
    up = _transition(1.0 - x)
    down = _transition(x)
    return up / (up + down)


@dataclass(frozen=True)
class DyadicShell:
    """Dyadic block N in {1/2, 1, 2, 4, ...}; N = 1/2 is the psi block."""

    N: float

    def __post_init__(self) -> None:
        if self.N != LOW and (self.N < 1 or not float(np.log2(self.N)).is_integer()):
            raise ValueError(f'Dyadic index must be 1/2 or a power of two, got {self.N}')

    def profile(self, r) -> np.ndarray:
        if self.N == LOW:
            return chi(r)
        r = np.asarray(r, dtype=float)
        return chi(r / (2 * self.N)) - chi(r / self.N)

    def multiplier(self, grid: PhaseGrid) -> np.ndarray:
        return self.profile(grid.bracket())


def top_index(grid: PhaseGrid) -> int:
    """Smallest power of two covering every |Xi| on the grid."""
    return int(2 ** np.ceil(np.log2(max(1.0, float(np.max(grid.bracket()))))))


def dyadic_shells(grid: PhaseGrid) -> list[DyadicShell]:
    shells = [DyadicShell(LOW)]
    N = 1
    while N <= top_index(grid):
        shells.append(DyadicShell(N))
        N *= 2
    return shells


def below_profile(grid: PhaseGrid, N: float) -> np.ndarray:
    """psi + sum_{N' < N} phi_N' = chi(|Xi|/N) for N >= 1, empty below."""
    if N < 1:
        return np.zeros(grid.shape)
    return chi(grid.bracket() / N)


def lp_project(spec: FieldSpectrum, shell: DyadicShell) -> FieldSpectrum:
    return spec.with_coeffs(spec.coeffs * shell.multiplier(spec.grid))


def lp_below(spec: FieldSpectrum, N: float) -> FieldSpectrum:
    return spec.with_coeffs(spec.coeffs * below_profile(spec.grid, N))


def dealias_mask(grid: PhaseGrid) -> np.ndarray:
    """2/3 rule in x: keep |k| <= Nx/3."""
    return (np.abs(grid.modes) <= grid.Nx / 3)[:, None]


def product(f: FieldSpectrum, g: FieldSpectrum) -> FieldSpectrum:
    """Spectrum of the pointwise product, dealiased in x only."""
    f.check_compatible(g)
    mask = dealias_mask(f.grid)
    fx = to_real_space(f.with_coeffs(f.coeffs * mask))
    gx = to_real_space(g.with_coeffs(g.coeffs * mask))
    out = from_real_space(f.grid, fx * gx, f.frame)
    return out.with_coeffs(out.coeffs * mask)


def paraproduct_split(f: FieldSpectrum, g: FieldSpectrum) -> tuple[FieldSpectrum, FieldSpectrum, FieldSpectrum]:
    """Bony decomposition fg = T_f g + T_g f + R.

    T_f g = sum_{N >= 8} f_{<N/8} g_N, T_g f = sum_{N >= 8} f_N g_{<N/8}
    and R collects the pairs with N/8 <= N' <= 8N.

    Returns:
        (Tfg, Tgf, R)
    """
    f.check_compatible(g)
    shells = dyadic_shells(f.grid)
    f_parts = {sh.N: lp_project(f, sh) for sh in shells}
    g_parts = {sh.N: lp_project(g, sh) for sh in shells}
    zero = FieldSpectrum.zeros(f.grid, f.frame)

    tfg = zero
    tgf = zero
    rem = zero
    for sh in shells:
        N = sh.N
        if N >= 8:
            tfg = tfg + product(lp_below(f, N / 8), g_parts[N])
            tgf = tgf + product(f_parts[N], lp_below(g, N / 8))
        near = [g_parts[M] for M in g_parts if N / 8 <= M <= 8 * N]
        if near:
            g_near = near[0]
            for part in near[1:]:
                g_near = g_near + part
            rem = rem + product(f_parts[N], g_near)
    return tfg, tgf, rem
