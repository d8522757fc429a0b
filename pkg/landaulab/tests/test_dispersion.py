# -*- coding: utf-8 -*-
import numpy as np
import pytest

from landaulab import dispersion, equilibria, volterra


@pytest.fixture(scope='module')
def maxwellian():
    return equilibria.make_maxwellian()


@pytest.fixture(scope='module')
def tabulated():
    v = np.linspace(-10, 10, 2001)
    return equilibria.make_custom(v, equilibria.make_maxwellian().profile(v))


@pytest.mark.parametrize('eq', [equilibria.make_maxwellian(1.0), equilibria.make_two_stream(2.0, 0.5)])
def test_closed_form_matches_quadrature(eq):
    W = equilibria.coulomb(4.0)
    xi = 0.3 + 1j
    closed = dispersion.dispersion_function(eq, W, 1, xi, 'closed')
    quad = dispersion.dispersion_function(eq, W, 1, xi, 'quadrature')
    assert abs(closed - quad) <= 1e-8 * abs(closed)


def test_tabulated_matches_closed_form(maxwellian, tabulated):
    W = equilibria.coulomb(4.0)
    for xi in (-0.5 + 0.7j, -0.5 - 2j):
        closed = dispersion.dispersion_function(maxwellian, W, 1, xi)
        table = dispersion.dispersion_function(tabulated, W, 1, xi)
        assert abs(closed - table) <= 1e-8 * abs(closed)


def test_axis_value_plemelj(maxwellian, tabulated):
    W = equilibria.coulomb(4.0)
    closed = dispersion.axis_value(maxwellian, W, 1, 0.5)
    plemelj = dispersion.axis_value(tabulated, W, 1, 0.5)
    assert abs(closed - plemelj) <= 1e-3


def test_dispersion_edge_cases(maxwellian, tabulated):
    with pytest.raises(ValueError):
        dispersion.dispersion_function(maxwellian, equilibria.coulomb(), 0, 1j)
    with pytest.raises(ValueError):
        dispersion.dispersion_function(tabulated, equilibria.coulomb(), 1, 1j, 'closed')
    with pytest.raises(ValueError):
        dispersion.dispersion_function(maxwellian, equilibria.coulomb(), 1, 1j, 'series')
    assert dispersion.dispersion_function(maxwellian, equilibria.free_transport(), 1, 1j) == 0


def test_landau_root(maxwellian):
    roots = dispersion.find_dispersion_roots(maxwellian, equilibria.coulomb(4.0), 1)
    assert roots
    least = max(roots, key=lambda r: r.exponent.real)
    assert least.damped
    assert least.exponent.real == pytest.approx(-0.3067, abs=2e-3)
    assert abs(least.exponent.imag) == pytest.approx(2.8312, abs=2e-3)
    assert least.residual < dispersion.NEWTON_TOL


def test_jeans_root(maxwellian):
    root = dispersion.newton_root(maxwellian, equilibria.newton(4.0), 1, -1.0 + 0j)
    assert root is not None
    assert root.xi.real == pytest.approx(-1.38, abs=0.01)
    assert abs(root.xi.imag) < 1e-8
    assert not root.damped
    assert dispersion.newton_root(maxwellian, equilibria.free_transport(), 1, 0j) is None


def test_penrose_maxwellian(maxwellian):
    for A in (0.5, 4.0):
        report = dispersion.penrose_check(maxwellian, equilibria.newton(A), [1, 2])
        for mode in report.modes:
            assert len(mode.points) == 1
            point = mode.points[0]
            assert point.w == pytest.approx(0.0, abs=1e-10)
            assert point.value == pytest.approx(A / mode.k ** 2, abs=1e-6)
        assert report.passed == (A < 1)
    assert dispersion.penrose_check(maxwellian, equilibria.coulomb(4.0), [1, 2, 3]).passed


def test_jeans_threshold(maxwellian):
    lo, hi = 0.5, 2.0
    for _ in range(20):
        mid = 0.5 * (lo + hi)
        if dispersion.penrose_check(maxwellian, equilibria.newton(mid), [1]).passed:
            lo = mid
        else:
            hi = mid
    assert 0.5 * (lo + hi) == pytest.approx(1.0, rel=0.01)


def test_two_stream_penrose():
    eq = equilibria.make_two_stream(3.0, 1.0)
    report = dispersion.penrose_check(eq, equilibria.coulomb(2.0), [1])
    centre = min(report.modes[0].points, key=lambda p: abs(p.w))
    assert abs(centre.w) < 1e-8
    assert 0.1 * 2.0 < centre.value < 0.3 * 2.0
    assert len(report.modes[0].points) == 3
    assert report.passed
    assert not dispersion.penrose_check(eq, equilibria.coulomb(10.0), [1]).passed
    assert report.as_dict()['passed'] is True


@pytest.mark.parametrize('A', [0.5, 0.8, 1.2, 2.0, 4.0])
def test_criteria_agree(maxwellian, A):
    W = equilibria.newton(A)
    report = dispersion.penrose_check(maxwellian, W, [1])
    margin = dispersion.condition_L_margin(maxwellian, W, k_max=1, winding=False)
    assert report.passed == margin.stable
    assert margin.label == 'sampled'


def test_margin_report(maxwellian):
    margin = dispersion.condition_L_margin(maxwellian, equilibria.coulomb(4.0), k_max=2, n_mu=8,
                                           n_zeta=129)
    assert margin.stable
    assert margin.root is None
    assert margin.windings == {1: 0, -1: 0, 2: 0, -2: 0}
    doc = margin.as_dict()
    assert doc['kappa'] == margin.kappa
    assert set(doc['tails']) == {'zeta', 'k', 'mu'}
    assert all(np.isfinite(v) and v >= 0 for v in doc['tails'].values())


def test_winding_numbers(maxwellian):
    assert dispersion.winding_number(maxwellian, equilibria.coulomb(4.0), 1, 8.0, 257) == 0
    assert abs(dispersion.winding_number(maxwellian, equilibria.newton(4.0), 1, 8.0, 257)) == 1


def test_truncation_point(maxwellian):
    upper = dispersion.truncation_point(maxwellian, 0.0)
    assert np.exp(-0.5 * upper ** 2) * upper < 1e-16
    assert dispersion.truncation_point(maxwellian, 12.0) > upper


@pytest.fixture(scope='module')
def lopsided():
    v = np.linspace(-10, 10, 2001)
    f = np.exp(-0.5 * v ** 2) + 0.3 * np.exp(-2.0 * (v - 2.0) ** 2)
    return equilibria.make_custom(v, f)


def test_mode_reflection_is_conjugation(lopsided):
    W = equilibria.coulomb(4.0)
    assert not lopsided.symmetric
    for xi in (-0.5 + 0.7j, -0.2 - 1.5j):
        for k in (1, 2):
            forward = dispersion.dispersion_function(lopsided, W, k, np.conj(xi))
            backward = dispersion.dispersion_function(lopsided, W, -k, xi)
            assert backward == pytest.approx(np.conj(forward), rel=1e-10)
    on_axis = dispersion.dispersion_function(lopsided, W, 1, -0.5)
    assert dispersion.dispersion_function(lopsided, W, -1, -0.5) == pytest.approx(np.conj(on_axis), rel=1e-10)
    assert abs(on_axis.imag) > 1e-6


def test_panel_refinement_converges(maxwellian):
    c = 0.3 + 6j
    exact = dispersion._maxwell_moments(c, 1.0)[0]
    upper = dispersion.truncation_point(maxwellian, c.real)

    def integrand(u):
        return np.exp(c * u) * maxwellian.transform(u) * u

    errors = [abs(dispersion._panel_integral(integrand, upper, n)[0] - exact) for n in (4, 8, 16, 32)]
    for coarse, fine in zip(errors, errors[1:]):
        assert fine <= max(coarse, 1e-12)
    assert errors[-1] < 1e-10 * abs(exact)
    assert dispersion.laplace_moment(maxwellian, 1, c) == pytest.approx(exact, rel=1e-11)


def test_volterra_decay_matches_root(maxwellian):
    W = equilibria.coulomb(4.0)
    roots = dispersion.find_dispersion_roots(maxwellian, W, 1)
    least = max(roots, key=lambda r: r.exponent.real)
    data = volterra.GaussianPerturbation({1: 1e-3})
    trace = volterra.linear_density(data, maxwellian, W, 40.0, 0.05)
    fit = volterra.fit_decay_rate(trace.times, trace.mode(1), 10.0, 40.0)
    assert fit.rate == pytest.approx(least.exponent.real, rel=0.02)
    assert fit.frequency == pytest.approx(abs(least.exponent.imag), rel=0.01)
