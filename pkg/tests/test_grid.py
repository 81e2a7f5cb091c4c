"""Grids, unit conversions and quadrature against textbook values."""

import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy.integrate import simpson

from specswap.grid import (
    C_NM_PER_PS,
    TWO_PI_C,
    FrequencyGrid,
    angular_frequency,
    integrate_1d,
    integrate_2d,
    refine_integral,
    simpson_weights,
    wavelength,
)


def test_speed_of_light_constant():
    assert C_NM_PER_PS == 299792.458
    assert TWO_PI_C == 2.0 * np.pi * 299792.458


def test_wavelength_frequency_roundtrip():
    for lam in (415.0, 830.0, 1550.0):
        assert wavelength(angular_frequency(lam)) == pytest.approx(lam, rel=1e-14)
    # 830 nm carrier, the value used throughout the shipped configs
    assert angular_frequency(830.0) == pytest.approx(2269.4597, rel=1e-7)


def test_conversions_reject_nonpositive():
    with pytest.raises(ValueError):
        angular_frequency(0.0)
    with pytest.raises(ValueError):
        wavelength(-1.0)


def test_symmetric_grid_properties():
    g = FrequencyGrid.symmetric(2269.46, 5.0, count=11, ref_bandwidth=2.5)
    assert g.count == 11
    assert g.spacing == pytest.approx(1.0)
    assert g.half_width == pytest.approx(5.0)
    assert g.extent == pytest.approx(2.0)  # half-width in bandwidth units
    assert_allclose(g.absolute, 2269.46 + g.detunings)
    assert g.detunings[0] == -g.detunings[-1]


def test_grid_validation():
    with pytest.raises(ValueError):
        FrequencyGrid(1.0, np.array([0.0, 1.0, 3.0]))  # non-uniform
    with pytest.raises(ValueError):
        FrequencyGrid(1.0, np.array([-1.0, 0.0, 2.0]))  # asymmetric
    with pytest.raises(ValueError):
        FrequencyGrid(1.0, np.array([1.0]))  # too short
    with pytest.raises(ValueError):
        FrequencyGrid(1.0, np.array([1.0, 0.0, -1.0]))  # decreasing
    with pytest.raises(ValueError):
        FrequencyGrid.symmetric(1.0, -2.0)


def test_doubled_preserves_span_and_nodes():
    g = FrequencyGrid.symmetric(100.0, 4.0, count=9)
    d = g.doubled()
    assert d.count == 17
    assert d.detunings[0] == g.detunings[0]
    assert d.detunings[-1] == g.detunings[-1]
    # original nodes survive at even indices
    assert_allclose(d.detunings[::2], g.detunings)


def test_simpson_weights_match_scipy_odd_counts():
    rng = np.random.default_rng(4)
    for n in (3, 9, 257):
        y = rng.normal(size=n)
        w = simpson_weights(n, 0.37)
        assert np.dot(w, y) == pytest.approx(simpson(y, dx=0.37), rel=1e-13)


def test_simpson_weights_exact_for_cubics():
    # composite Simpson integrates cubics exactly on each panel pair
    n, dx = 21, 0.25
    x = np.arange(n) * dx
    w = simpson_weights(n, dx)
    for k in range(4):
        exact = x[-1] ** (k + 1) / (k + 1)
        assert np.dot(w, x**k) == pytest.approx(exact, rel=1e-13)


def test_simpson_weights_even_count_sums_to_span():
    for n in (2, 4, 10):
        w = simpson_weights(n, 0.5)
        assert np.sum(w) == pytest.approx((n - 1) * 0.5, rel=1e-13)
    with pytest.raises(ValueError):
        simpson_weights(1, 0.5)


def test_integrate_1d_gaussian():
    g = FrequencyGrid.symmetric(0.0, 10.0, count=801)
    vals = np.exp(-g.detunings**2 / 2.0)
    assert integrate_1d(vals, g) == pytest.approx(np.sqrt(2 * np.pi), rel=1e-12)
    # plain spacing works too
    assert integrate_1d(vals, g.spacing) == pytest.approx(np.sqrt(2 * np.pi), rel=1e-12)


def test_integrate_1d_complex():
    g = FrequencyGrid.symmetric(0.0, 12.0, count=1201)
    x = g.detunings
    vals = np.exp(-(x**2) / 2.0 + 1j * x)
    # int exp(-x^2/2 + i x) = sqrt(2 pi) exp(-1/2)
    expected = np.sqrt(2 * np.pi) * np.exp(-0.5)
    got = integrate_1d(vals, g)
    assert got.real == pytest.approx(expected, rel=1e-12)
    assert abs(got.imag) < 1e-12


def test_integrate_2d_separable():
    ga = FrequencyGrid.symmetric(0.0, 9.0, count=301)
    gb = FrequencyGrid.symmetric(0.0, 17.0, count=401)
    vals = np.exp(-ga.detunings[:, None] ** 2 / 2 - gb.detunings[None, :] ** 2 / 8)
    assert integrate_2d(vals, ga, gb) == pytest.approx(2 * np.pi * 2.0, rel=1e-10)
    with pytest.raises(ValueError):
        integrate_2d(vals[0], ga, gb)


def test_integrate_rules_agree_on_fine_grid():
    g = FrequencyGrid.symmetric(0.0, 8.0, count=2001)
    vals = np.exp(-g.detunings**2 / 2.0) * np.cos(g.detunings)
    s = integrate_1d(vals, g, rule="simpson")
    t = integrate_1d(vals, g, rule="trapezoid")
    assert s == pytest.approx(t, rel=1e-7)
    with pytest.raises(ValueError):
        integrate_1d(vals, g, rule="midpoint")


def test_integrate_rejects_nonfinite():
    g = FrequencyGrid.symmetric(0.0, 1.0, count=5)
    bad = np.array([0.0, 1.0, np.nan, 1.0, 0.0])
    with pytest.raises(ValueError):
        integrate_1d(bad, g)


def test_refine_integral_converges():
    base = FrequencyGrid.symmetric(0.0, 10.0, count=33)

    def f(g):
        return np.exp(-g.detunings**2 / 2.0)

    value, diff, evals = refine_integral(f, base, tol=1e-12)
    assert value == pytest.approx(np.sqrt(2 * np.pi), rel=1e-10)
    assert diff <= 1e-12 * max(abs(value), 1.0)
    assert evals > base.count


def test_refine_integral_budget_exhausted():
    base = FrequencyGrid.symmetric(0.0, 10.0, count=9)

    def f(g):
        return np.exp(-g.detunings**2 / 2.0) * np.cos(3 * g.detunings)

    with pytest.raises(RuntimeError):
        refine_integral(f, base, tol=1e-30, max_doublings=1)
