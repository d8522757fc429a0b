# -*- coding: utf-8 -*-
import numpy as np
import pytest
from scipy.integrate import trapezoid

from landaulab import equilibria
from landaulab.errors import InadmissibleRadius, ParameterError


def test_maxwellian_transform():
    eq = equilibria.make_maxwellian(2.0)
    eta = np.linspace(-3, 3, 13)
    assert eq.transform(0.0) == pytest.approx(1.0)
    assert np.allclose(eq.transform(eta), np.exp(-eta ** 2))
    assert np.allclose(eq.transform(eta, 1), -2.0 * eta * np.exp(-eta ** 2))
    assert np.allclose(eq.transform(eta, 2), (4.0 * eta ** 2 - 2.0) * np.exp(-eta ** 2))


def test_maxwellian_profile():
    eq = equilibria.make_maxwellian()
    v = np.linspace(-10, 10, 4001)
    assert trapezoid(eq.profile(v), v) == pytest.approx(1.0)
    assert np.allclose(eq.derivative(v), np.gradient(eq.profile(v), v), atol=1e-5)


def test_two_stream_transform():
    eq = equilibria.make_two_stream(3.0, 1.0)
    eta = np.linspace(-2, 2, 9)
    expected = np.cos(3.0 * eta) * np.exp(-0.5 * eta ** 2)
    slope = -3.0 * np.sin(3.0 * eta) * np.exp(-0.5 * eta ** 2) - eta * expected
    assert np.allclose(eq.transform(eta), expected)
    assert np.allclose(eq.transform(eta, 1), slope)
    assert eq.profile(3.0) > eq.profile(0.0)


def test_tabulated_matches_maxwellian():
    v = np.linspace(-10, 10, 2001)
    reference = equilibria.make_maxwellian()
    eq = equilibria.make_custom(v, reference.profile(v))
    eta = np.linspace(0, 10, 41)
    assert np.max(np.abs(eq.transform(eta) - reference.transform(eta))) <= 1e-10
    assert np.max(np.abs(eq.transform(eta, 1) - reference.transform(eta, 1))) <= 1e-10
    assert eq.symmetric
    assert eq.velocity_window == 10.0


def test_tabulated_normalizes():
    v = np.linspace(-10, 10, 2001)
    eq = equilibria.make_custom(v, 3.0 * np.exp(-0.5 * v ** 2))
    assert eq.transform(0.0).real == pytest.approx(1.0)


def test_tabulated_envelope_is_monotone():
    v = np.linspace(-10, 10, 2001)
    eq = equilibria.make_custom(v, np.exp(-0.5 * (v - 1.0) ** 2))
    assert not eq.symmetric
    eta = np.linspace(0.0, eq.band, eq._ENVELOPE_SAMPLES)[:600]
    env = eq.envelope(eta)
    assert np.all(np.diff(env) <= 0)
    assert np.all(env + 1e-12 >= np.abs(eq.transform(eta)))
    assert eq.envelope(2 * eq.band) == 0.0


@pytest.mark.parametrize('v, f', [
    (np.linspace(-1, 1, 5), np.ones(5)),
    (np.linspace(-1, 1, 16), np.ones(15)),
    (np.concatenate([np.linspace(-1, 0, 8), np.linspace(0.5, 1, 8)]), np.ones(16)),
    (np.linspace(-1, 1, 16), -np.ones(16)),
    (np.linspace(-1, 1, 16), np.zeros(16)),
])
def test_invalid_table(v, f):
    with pytest.raises(ParameterError):
        equilibria.make_custom(v, f)


def test_marginal_direction():
    eq = equilibria.make_custom(np.linspace(-10, 10, 2001), np.exp(-0.5 * (np.linspace(-10, 10, 2001) - 1) ** 2))
    assert eq.marginal(1.0, 1) == pytest.approx(eq.profile(1.0))
    assert eq.marginal(1.0, -2) == pytest.approx(eq.profile(-1.0))
    assert eq.transform_along(-1, 2.0) == pytest.approx(eq.transform(-2.0))


def test_interaction_multipliers():
    assert np.allclose(equilibria.coulomb(4.0).multiplier([0, 1, 2]), [0.0, 4.0, 1.0])
    assert np.allclose(equilibria.newton(4.0).multiplier([0, -1, 2]), [0.0, -4.0, -1.0])
    assert np.allclose(equilibria.coulomb(1.0, 2.0)([2]), [0.125])
    assert equilibria.coulomb(4.0).kind == 'coulomb'
    assert equilibria.newton(4.0).kind == 'newton'
    free = equilibria.free_transport()
    assert free.is_free and free.kind == 'free'
    assert not np.any(free.multiplier(np.arange(-4, 5)))


def test_interaction_validation():
    with pytest.raises(ParameterError):
        equilibria.coulomb(-1.0)
    with pytest.raises(ParameterError):
        equilibria.coulomb(1.0, 0.5)
    with pytest.raises(ParameterError):
        equilibria.Interaction(1.0, 1.0, 0)
    with pytest.raises(ParameterError):
        equilibria.Interaction(1.0, 1.0, 1, custom=lambda k: 2.0 / k ** 2)
    smooth = equilibria.Interaction(1.0, 1.0, 1, custom=lambda k: np.exp(-k) / k ** 2)
    assert smooth.kind == 'custom'
    assert smooth.multiplier(1) == pytest.approx(np.exp(-1))


def test_stability_params():
    equilibria.StabilityParams(0.1, 1e-3, 1.0, 1)
    with pytest.raises(ParameterError):
        equilibria.StabilityParams(0.0, 1e-3, 1.0, 1)
    with pytest.raises(ParameterError):
        equilibria.StabilityParams(0.1, 1e-3, 1.0, 0)


def test_localization_maxwellian():
    total = equilibria.check_localization(equilibria.make_maxwellian(), 0.5, 1)
    assert np.isfinite(total) and total > 0


def test_localization_box_diverges():
    v = np.linspace(-4, 4, 801)
    box = np.where(np.abs(v) <= 1.0, 1.0, 0.0)
    with pytest.raises(InadmissibleRadius):
        equilibria.check_localization(equilibria.make_custom(v, box), 0.5, 1)
