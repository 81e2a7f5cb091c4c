"""Source distinguishability: translated spectra, overlaps, phase fringes."""

import numpy as np
import pytest

from specswap.distinguish import (
    ShiftedJSA,
    cross_purity,
    double_pair_overlap,
    exchange_term,
    fourfold_phase_fringes,
    herald_visibility,
    pump_phase_fringes,
    source_overlap,
    swapped_fourfold_probability,
    translated,
    translation_overlap_closed,
)


@pytest.fixture(scope="module")
def pair(jsa5):
    """Reference source and a rigid spectral translation of it."""
    return translated(jsa5), translated(jsa5, delta_s=0.6, delta_i=-0.4)


class TestShiftedJSA:
    def test_amplitude_is_translated(self, jsa5):
        sh = translated(jsa5, delta_s=0.6, delta_i=-0.4)
        assert isinstance(sh, ShiftedJSA)
        assert sh.amplitude(0.6, -0.4) == pytest.approx(jsa5.amplitude(0.0, 0.0))
        assert sh.amplitude(1.1, 0.2) == pytest.approx(jsa5.amplitude(0.5, 0.6))

    def test_default_grids_cover_the_shift(self, jsa5):
        base = jsa5.default_grid_s()
        sh = translated(jsa5, delta_s=2.0, delta_i=-1.5)
        gs, gi = sh.default_grid_s(), sh.default_grid_i()
        assert gs.half_width >= base.half_width + 2.0
        assert gi.half_width >= jsa5.default_grid_i().half_width + 1.5
        # still symmetric, so shared quadrature with the base stays valid
        assert gs.detunings[0] == -gs.detunings[-1]


class TestSourceOverlap:
    def test_matches_closed_form(self, jsa5, pair):
        a, b = pair
        quad = source_overlap(a, b)
        closed = translation_overlap_closed(jsa5, 0.6, -0.4)
        assert abs(quad - closed) < 1e-6 * closed
        assert abs(quad.imag) < 1e-12

    def test_identical_sources(self, jsa5):
        val = source_overlap(translated(jsa5), translated(jsa5))
        assert val.real == pytest.approx(1.0, abs=1e-6)

    def test_closed_form_needs_gaussian(self, jsa5, pair):
        with pytest.raises(TypeError):
            translation_overlap_closed(pair[0], 0.1, 0.1)

    def test_decay_with_distance(self, jsa5):
        vals = [
            translation_overlap_closed(jsa5, d, 0.0) for d in (0.0, 0.5, 1.0, 2.0)
        ]
        assert vals[0] == 1.0
        assert vals[0] > vals[1] > vals[2] > vals[3]


class TestHeraldVisibility:
    def test_closed_form_for_translations(self, jsa5, pair):
        # the heralded-mode displacement is d = delta_s + 2 a s_s^2 delta_i
        # at every bin, so the two-bin product is exp(-d^2 / (4 s_s^2))
        a, b = pair
        d = 0.6 + 2.0 * jsa5.alpha * jsa5.sigma_s**2 * (-0.4)
        expect = np.exp(-(d**2) / (4.0 * jsa5.sigma_s**2))
        assert herald_visibility(a, b, 2.0, -2.0) == pytest.approx(expect, rel=1e-9)

    def test_bin_independent_for_translations(self, pair):
        a, b = pair
        v1 = herald_visibility(a, b, 2.0, -2.0)
        v2 = herald_visibility(a, b, 0.5, -3.5)
        assert v1 == pytest.approx(v2, rel=1e-9)

    def test_aligned_translation_is_invisible(self, jsa5):
        # shifting along the conditional ridge leaves the heralded modes
        # unchanged, so the visibility bound stays at one
        ds = 0.6
        di = -ds / (2.0 * jsa5.alpha * jsa5.sigma_s**2)
        b = translated(jsa5, delta_s=ds, delta_i=di)
        assert herald_visibility(translated(jsa5), b, 2.0, -2.0) == pytest.approx(
            1.0, abs=1e-9
        )

    def test_bounded_below_by_squared_overlap(self, jsa5):
        for ds, di in ((0.6, -0.4), (0.3, 0.3), (1.0, 0.0)):
            b = translated(jsa5, delta_s=ds, delta_i=di)
            vis = herald_visibility(translated(jsa5), b, 2.0, -2.0)
            assert vis >= translation_overlap_closed(jsa5, ds, di) ** 2 - 1e-12


class TestExchangeAndPurity:
    def test_self_exchange_is_inverse_schmidt_number(self, jsa5):
        a = translated(jsa5)
        for axis in ("signal", "idler"):
            val = exchange_term(a, a, axis)
            assert val.real == pytest.approx(1.0 / jsa5.schmidt_number, rel=1e-6)
            assert abs(val.imag) < 1e-12

    def test_cross_purity_identical_sources(self, jsa5):
        val = cross_purity(translated(jsa5), translated(jsa5))
        assert val == pytest.approx(1.0 / jsa5.schmidt_number, rel=1e-6)

    def test_cross_purity_falls_off(self, jsa5, pair):
        a, b = pair
        assert cross_purity(a, b) < cross_purity(a, a)
        # the signal marginal is Schmidt broadened, so the falloff scale
        # is several base widths
        far = translated(jsa5, delta_s=20.0, delta_i=0.0)
        assert cross_purity(a, far) < 0.1 * cross_purity(a, a)

    def test_cross_purity_ignores_other_axis(self, jsa5):
        # a rigid idler translation leaves the signal reduced state alone
        a = translated(jsa5)
        val = cross_purity(a, translated(jsa5, delta_s=0.0, delta_i=3.0), "signal")
        assert val == pytest.approx(1.0 / jsa5.schmidt_number, rel=1e-6)

    def test_axis_validation(self, pair):
        a, b = pair
        with pytest.raises(ValueError):
            exchange_term(a, b, axis="pump")
        with pytest.raises(ValueError):
            cross_purity(a, b, axis="pump")

    def test_double_pair_overlap_identical(self, jsa5):
        val = double_pair_overlap(translated(jsa5), translated(jsa5))
        assert val.real == pytest.approx(1.0, abs=1e-6)
        assert abs(val.imag) < 1e-9

    def test_double_pair_overlap_tracks_squared_overlap(self, jsa5, pair):
        a, b = pair
        o2 = translation_overlap_closed(jsa5, 0.6, -0.4) ** 2
        val = abs(double_pair_overlap(a, b))
        assert val < 1.0
        assert val == pytest.approx(o2, rel=0.01)


class TestPumpPhaseFringes:
    def test_visibility_formula(self, pair):
        a, b = pair
        phases = np.linspace(0.0, 2.0 * np.pi, 16, endpoint=False)
        tr = pump_phase_fringes(a, b, phases, eta_a=0.06, eta_b=0.04)
        o = source_overlap(a, b)
        mu = 2.0 * np.sqrt(0.06 * 0.04) * abs(o) / (0.06 + 0.04)
        assert tr.meta["visibility"] == pytest.approx(mu, rel=1e-12)
        assert tr.meta["overlap_mag"] == pytest.approx(abs(o), rel=1e-12)
        assert tr.values.max() == pytest.approx(0.5 * (1.0 + mu), rel=1e-6)

    def test_ports_sum_to_constant(self, pair):
        a, b = pair
        phases = np.linspace(0.0, 2.0 * np.pi, 16, endpoint=False)
        plus = pump_phase_fringes(a, b, phases, 0.06, 0.04, port_sign=+1)
        minus = pump_phase_fringes(a, b, phases, 0.06, 0.04, port_sign=-1)
        assert np.ptp(plus.values + minus.values) == 0.0
        assert plus.meta["port_sign"] == 1
        assert minus.meta["port_sign"] == -1

    def test_identical_sources_balanced_taps(self, jsa5):
        phases = np.array([0.0, np.pi / 2.0, np.pi])
        tr = pump_phase_fringes(translated(jsa5), translated(jsa5), phases)
        assert tr.meta["visibility"] == pytest.approx(1.0, abs=1e-6)
        assert tr.values[0] == pytest.approx(1.0, abs=1e-6)
        assert tr.values[2] == pytest.approx(0.0, abs=1e-6)

    def test_port_sign_validation(self, pair):
        with pytest.raises(ValueError):
            pump_phase_fringes(pair[0], pair[1], [0.0], port_sign=0)


class TestFourfoldPhaseFringes:
    def test_swapped_probability_identical(self, jsa5):
        val = swapped_fourfold_probability(translated(jsa5), translated(jsa5))
        assert val == pytest.approx(
            0.5 * (1.0 - 1.0 / jsa5.schmidt_number), rel=1e-6
        )

    def test_swapped_probability_drops_with_mismatch(self, jsa5, pair):
        a, b = pair
        assert swapped_fourfold_probability(a, b) < swapped_fourfold_probability(a, a)

    def test_frequency_doubling(self, pair):
        # the double-pair interference rides at twice the pump phase, so
        # the fourfold trace is pi periodic while singles are not
        a, b = pair
        phases = np.array([0.3, 0.3 + np.pi])
        four = fourfold_phase_fringes(a, b, phases, 0.06, 0.04)
        single = pump_phase_fringes(a, b, phases, 0.06, 0.04)
        assert four.meta["frequency_ratio"] == 2.0
        assert four.values[0] == pytest.approx(four.values[1], rel=1e-12)
        assert abs(single.values[0] - single.values[1]) > 0.1

    def test_modulation_depth_from_trace(self, pair):
        a, b = pair
        phases = np.linspace(0.0, np.pi, 721)
        tr = fourfold_phase_fringes(a, b, phases, 0.06, 0.04)
        depth = (tr.values.max() - tr.values.min()) / (
            tr.values.max() + tr.values.min()
        )
        assert depth == pytest.approx(tr.meta["modulation_depth"], rel=1e-9)
        assert tr.meta["pair_overlap"] == pytest.approx(
            abs(double_pair_overlap(a, b)), rel=1e-12
        )

    def test_identical_source_depth(self, jsa5):
        # equal rates and unit overlap: depth = (1 + 1/K) / (3 - 1/K)
        tr = fourfold_phase_fringes(
            translated(jsa5), translated(jsa5), np.linspace(0.0, np.pi, 9), 0.06, 0.06
        )
        k_inv = 1.0 / jsa5.schmidt_number
        assert tr.meta["modulation_depth"] == pytest.approx(
            (1.0 + k_inv) / (3.0 - k_inv), rel=1e-6
        )

    def test_rates_positive(self, pair):
        a, b = pair
        tr = fourfold_phase_fringes(a, b, np.linspace(0.0, 2.0 * np.pi, 33), 0.06, 0.04)
        assert np.all(tr.values > 0.0)
