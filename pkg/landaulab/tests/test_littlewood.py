# -*- coding: utf-8 -*-
import numpy as np
import pytest

from landaulab import littlewood
from landaulab.grid import FieldSpectrum, PhaseGrid, from_real_space


@pytest.fixture
def grid():
    return PhaseGrid(16, 64, 8.0)


def _random_field(grid, rng):
    return from_real_space(grid, rng.standard_normal(grid.shape))


def test_chi_profile():
    r = np.array([0.0, 0.25, 0.5, 0.6, 0.75, 2.0])
    values = littlewood.chi(r)
    assert values[0] == values[1] == values[2] == 1.0
    assert 0.0 < values[3] < 1.0
    assert values[4] == values[5] == 0.0
    assert np.all(np.diff(littlewood.chi(np.linspace(0, 1, 101))) <= 0)


def test_invalid_shell():
    with pytest.raises(ValueError):
        littlewood.DyadicShell(3)
    with pytest.raises(ValueError):
        littlewood.DyadicShell(0.25)


def test_partition_of_unity(grid):
    total = sum(shell.multiplier(grid) for shell in littlewood.dyadic_shells(grid))
    assert np.max(np.abs(total - 1.0)) <= 1e-14


def test_shells_cover_grid(grid):
    shells = littlewood.dyadic_shells(grid)
    assert shells[0].N == littlewood.LOW
    assert shells[-1].N == littlewood.top_index(grid)
    assert littlewood.top_index(grid) >= np.max(grid.bracket())


def test_below_is_sum_of_lower_shells(grid):
    spec = _random_field(grid, np.random.default_rng(0))
    below = littlewood.lp_below(spec, 4)
    parts = [littlewood.lp_project(spec, littlewood.DyadicShell(N)) for N in (littlewood.LOW, 1, 2)]
    assert np.max(np.abs(below.coeffs - sum(p.coeffs for p in parts))) <= 1e-14
    assert not np.any(littlewood.lp_below(spec, 0.5).coeffs)


def test_dealias_mask(grid):
    mask = littlewood.dealias_mask(grid)
    kept = grid.modes[mask[:, 0]]
    assert kept.min() == -5 and kept.max() == 5


def test_paraproduct_reconstruction(grid):
    rng = np.random.default_rng(20)
    for _ in range(20):
        f = _random_field(grid, rng)
        g = _random_field(grid, rng)
        tfg, tgf, rem = littlewood.paraproduct_split(f, g)
        full = littlewood.product(f, g)
        scale = np.max(np.abs(full.coeffs))
        assert np.max(np.abs((tfg + tgf + rem).coeffs - full.coeffs)) <= 1e-10 * scale


def test_product_of_constants(grid):
    ones = FieldSpectrum.zeros(grid)
    ones.coeffs[grid.Nx // 2, grid.Nv // 2] = 1.0
    square = littlewood.product(ones, ones)
    centre = square.coeffs[grid.Nx // 2, grid.Nv // 2]
    assert centre == pytest.approx(1 / (2 * grid.V))
    square.coeffs[grid.Nx // 2, grid.Nv // 2] = 0.0
    assert np.max(np.abs(square.coeffs)) <= 1e-14


def test_shells_are_almost_orthogonal(grid):
    spec = _random_field(grid, np.random.default_rng(3))
    shells = littlewood.dyadic_shells(grid)
    parts = [littlewood.lp_project(spec, shell) for shell in shells]
    total = sum(part.l2_norm() ** 2 for part in parts)
    assert 0.5 * spec.l2_norm() ** 2 <= total <= spec.l2_norm() ** 2 * (1 + 1e-12)
    for i, part in enumerate(parts):
        for other in parts[i + 2:]:
            assert np.vdot(part.coeffs, other.coeffs) == 0.0


def test_projection_does_not_increase_norm(grid):
    spec = _random_field(grid, np.random.default_rng(4))
    for shell in littlewood.dyadic_shells(grid):
        once = littlewood.lp_project(spec, shell)
        twice = littlewood.lp_project(once, shell)
        assert twice.l2_norm() <= once.l2_norm() * (1 + 1e-14)


def test_paraproduct_with_constant(grid):
    f = _random_field(grid, np.random.default_rng(5))
    ones = FieldSpectrum.zeros(grid)
    ones.coeffs[grid.Nx // 2, grid.Nv // 2] = 1.0
    tfg, tgf, rem = littlewood.paraproduct_split(f, ones)
    assert not np.any(tfg.coeffs)
    mask = littlewood.dealias_mask(grid)
    expected = f.coeffs * mask / (2 * grid.V)
    scale = np.max(np.abs(expected))
    assert np.max(np.abs((tgf + rem).coeffs - expected)) <= 1e-12 * scale
    high = f.coeffs - littlewood.lp_below(f, 8).coeffs
    assert np.max(np.abs(tgf.coeffs - high * mask / (2 * grid.V))) <= 1e-12 * scale


@pytest.fixture
def wide_grid():
    return PhaseGrid(32, 256, 8.0)


def test_paraproduct_pieces_stay_in_shells(wide_grid):
    grid = wide_grid
    rng = np.random.default_rng(6)
    f = littlewood.lp_below(_random_field(grid, rng), 32)
    g = littlewood.lp_below(_random_field(grid, rng), 32)
    r = grid.bracket()
    for N in (8, 16, 32):
        piece = littlewood.product(littlewood.lp_below(f, N / 8), littlewood.lp_project(g, littlewood.DyadicShell(N)))
        outside = (r <= 13 * N / 32) | (r >= 51 * N / 32)
        scale = np.max(np.abs(piece.coeffs))
        assert scale > 0
        assert np.max(np.abs(piece.coeffs[outside])) <= 1e-12 * scale
    tfg, tgf, _ = littlewood.paraproduct_split(f, g)
    low = r <= 3.25
    for part in (tfg, tgf):
        assert np.max(np.abs(part.coeffs[low])) <= 1e-12 * np.max(np.abs(part.coeffs))
