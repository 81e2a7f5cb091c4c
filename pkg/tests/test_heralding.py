"""Heralded Bell states: quadrature construction vs Gaussian closed forms."""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from specswap.grid import integrate_2d, simpson_weights
from specswap.heralding import (
    HeraldSetting,
    bsm_success_probability,
    herald,
    herald_probability_closed,
    heralded_mode,
    mode_overlap_closed,
    pjk_map,
)


def test_setting_phase_and_swap():
    s = HeraldSetting(herald_j=2.7, herald_k=-1.3, tau_i=0.2)
    assert s.theta == pytest.approx((2.7 + 1.3) * 0.2)
    sw = s.swapped()
    assert (sw.herald_j, sw.herald_k, sw.tau_i) == (-1.3, 2.7, 0.2)
    assert sw.theta == pytest.approx(-s.theta)
    with pytest.raises(ValueError):
        HeraldSetting(np.nan, 0.0)


def test_heralded_mode_center_and_density(jsa5):
    y0 = 2.2
    mode = heralded_mode(jsa5, y0)
    assert mode.center == pytest.approx(jsa5.conditional_center(y0), rel=1e-7)
    assert mode.norm_density == pytest.approx(
        jsa5.idler_spectral_density(y0), rel=1e-6
    )


def test_heralded_mode_rejects_empty_bin(jsa5):
    # far outside the idler marginal the conditional mode is undefined
    with pytest.raises(ValueError):
        heralded_mode(jsa5, 80.0)


def test_mode_overlap_closed_vs_quadrature(jsa5, jsa_asym):
    for jsa in (jsa5, jsa_asym):
        for j, k in ((1.0, -1.0), (2.73, -2.73), (0.0, 3.5)):
            mj = heralded_mode(jsa, j)
            mk = heralded_mode(jsa, k)
            ov = mj.overlap(mk)
            assert abs(ov.imag) < 1e-12
            closed = mode_overlap_closed(jsa, j, k)
            assert ov.real == pytest.approx(closed, rel=1e-6)
            # displaced-Gaussian overlap in the mode centers
            d = jsa.mode_slope * (j - k)
            assert closed == pytest.approx(
                np.exp(-(d**2) / (8 * jsa.sigma_s**2)), rel=1e-12
            )


def test_overlap_requires_shared_grid(jsa5):
    m1 = heralded_mode(jsa5, 1.0, jsa5.default_grid_s(257))
    m2 = heralded_mode(jsa5, -1.0, jsa5.default_grid_s(129))
    with pytest.raises(ValueError):
        m1.overlap(m2)


def test_herald_state_against_closed_probability(jsa5):
    for tau_i in (0.0, 0.15):
        setting = HeraldSetting(2.0, -2.0, tau_i)
        st = herald(jsa5, setting)
        assert st.theta == pytest.approx(setting.theta)
        assert st.c_norm == pytest.approx(
            1.0 - abs(st.overlap) ** 2 * np.cos(setting.theta), abs=1e-12
        )
        p_closed = herald_probability_closed(jsa5, 2.0, -2.0, tau_i)
        assert st.p_density == pytest.approx(p_closed, rel=1e-6)
        assert not st.degenerate


def test_joint_amplitude_normalized_and_antisymmetric(jsa5):
    st = herald(jsa5, HeraldSetting(1.5, -1.5))
    amp = st.joint_amplitude()
    g = st.mode_j.grid
    assert integrate_2d(np.abs(amp) ** 2, g, g) == pytest.approx(1.0, rel=1e-6)
    # at zero idler delay the heralded state is exchange-antisymmetric
    assert_allclose(amp, -amp.T, atol=1e-12)


def test_coefficient_matrix_structure(jsa5):
    st = herald(jsa5, HeraldSetting(2.0, -2.0, 0.08))
    m = st.coefficient_matrix
    assert_allclose(m, m.conj().T, atol=1e-14)
    ev = np.linalg.eigvalsh(m)
    assert ev[0] == pytest.approx(0.0, abs=1e-14)  # rank one: a pure state
    assert ev[1] == pytest.approx(1.0 / st.c_norm, rel=1e-12)
    # the off-diagonal element carries the interferometric phase
    assert np.angle(-m[0, 1]) == pytest.approx(-st.theta)


def test_degenerate_herald_flagged(jsa5):
    st = herald(jsa5, HeraldSetting(1.0, 1.0))
    assert st.degenerate
    assert st.p_density == pytest.approx(0.0, abs=1e-12)
    assert np.all(st.joint_amplitude() == 0)
    assert np.all(st.coefficient_matrix == 0)


def test_pjk_map_matches_closed_form(jsa5):
    for tau_i in (0.0, 0.12):
        g, pmap = pjk_map(jsa5, tau_i=tau_i, method="quadrature")
        om = g.detunings
        closed = herald_probability_closed(
            jsa5, om[:, None], om[None, :], tau_i
        )
        scale = closed.max()
        assert np.max(np.abs(pmap - closed)) < 1e-5 * scale
        # equal-bin heralds never fire, and swapping bins changes nothing
        assert_allclose(np.diag(pmap), 0.0, atol=1e-12 * scale)
        assert_allclose(pmap, pmap.T, atol=1e-12 * scale)


def test_bsm_success_probability(jsa5):
    for tau_i in (0.0, 0.25):
        q = bsm_success_probability(jsa5, tau_i)
        c = bsm_success_probability(jsa5, tau_i, method="closed")
        assert q == pytest.approx(c, rel=1e-5)
    assert bsm_success_probability(jsa5, 0.0, method="closed") == pytest.approx(
        0.5 * (1.0 - 1.0 / jsa5.schmidt_number), rel=1e-12
    )
    # the herald map integrates to the total success probability
    g, pmap = pjk_map(jsa5)
    w = simpson_weights(g.count, g.spacing)
    total = float(w @ pmap @ w)
    assert total == pytest.approx(bsm_success_probability(jsa5, 0.0), rel=1e-6)


def test_bsm_closed_requires_gaussian(jsa5):
    from specswap.jsa import GriddedJSA

    gs, gi = jsa5.default_grid_s(129), jsa5.default_grid_i(129)
    tab = GriddedJSA(gs, gi, jsa5.sample(gs, gi))
    with pytest.raises(ValueError):
        bsm_success_probability(tab, method="closed")
