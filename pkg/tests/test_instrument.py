"""Time-of-flight spectrometer chain: configs, pixel maps, digitization."""

import numpy as np
import pytest

from specswap.grid import TWO_PI_C, angular_frequency
from specswap.instrument import (
    FWHM_TO_SIGMA,
    PixelMap,
    TofsConfig,
    detuning_to_wavelength,
    freq_to_time,
    pixel_histogram,
    pixelize,
)


@pytest.fixture()
def tofs():
    return TofsConfig(
        dispersion=1000.0,
        center_wavelength=830.0,
        jitter_fwhm=20.0,
        tdc_bin=100.0,
        window=10.0,
        insertion_loss_db=10.0,
    )


class TestTofsConfig:
    def test_validation(self):
        with pytest.raises(ValueError):
            TofsConfig(dispersion=0.0, center_wavelength=830.0)
        with pytest.raises(ValueError):
            TofsConfig(dispersion=1000.0, center_wavelength=-1.0)
        with pytest.raises(ValueError):
            TofsConfig(dispersion=1000.0, center_wavelength=830.0, tdc_bin=0.0)
        with pytest.raises(ValueError):
            TofsConfig(dispersion=1000.0, center_wavelength=830.0, window=0.0)
        with pytest.raises(ValueError):
            TofsConfig(dispersion=1000.0, center_wavelength=830.0, jitter_fwhm=-1.0)
        with pytest.raises(ValueError):
            TofsConfig(dispersion=1000.0, center_wavelength=830.0, insertion_loss_db=-2.0)

    def test_spectral_resolution(self, tofs):
        # pixel size is one TDC bin worth of dispersion-mapped spectrum
        assert tofs.spectral_resolution == 0.1
        coarse = TofsConfig(dispersion=50.0, center_wavelength=830.0, tdc_bin=100.0)
        assert coarse.spectral_resolution == 2.0

    def test_jitter_sigma(self, tofs):
        assert tofs.jitter_sigma == pytest.approx(20.0 * FWHM_TO_SIGMA, rel=1e-12)
        assert FWHM_TO_SIGMA == pytest.approx(1.0 / 2.3548200450309493, rel=1e-12)

    def test_transmission(self, tofs):
        assert tofs.transmission == pytest.approx(0.1, rel=1e-12)
        lossless = TofsConfig(dispersion=1000.0, center_wavelength=830.0)
        assert lossless.transmission == 1.0

    def test_clock_offset_is_whole_ticks(self, tofs):
        raw = 0.5 * tofs.dispersion * tofs.window
        assert tofs.clock_offset >= raw
        assert tofs.clock_offset % tofs.tdc_bin == 0.0
        assert tofs.offset_ticks == int(tofs.clock_offset / tofs.tdc_bin)

    def test_jitter_blur_sigma(self, tofs):
        # composite response: jitter plus uniform TDC quantization error
        sigma_t = np.hypot(tofs.jitter_sigma, tofs.tdc_bin / np.sqrt(12.0))
        expect = sigma_t / tofs.dispersion * TWO_PI_C / 830.0**2
        assert tofs.jitter_blur_sigma() == pytest.approx(expect, rel=1e-12)
        # quantization keeps the blur finite even with a jitter-free detector
        quiet = TofsConfig(dispersion=1000.0, center_wavelength=830.0)
        assert quiet.jitter_blur_sigma() > 0.0


class TestPixelMap:
    def test_pixel_wavelength_roundtrip(self, tofs):
        pm = PixelMap(tofs)
        pix = np.arange(-50, 51)
        lam = pm.pixel_to_wavelength(pix)
        assert np.array_equal(pm.wavelength_to_pixel(lam), pix)
        assert pm.pixel_to_wavelength(0) == 830.0
        assert pm.pixel_nm == tofs.spectral_resolution

    def test_pixel_detuning_roundtrip(self, tofs):
        pm = PixelMap(tofs)
        pix = np.arange(-50, 51)
        assert np.array_equal(pm.detuning_to_pixel(pm.pixel_to_detuning(pix)), pix)
        assert pm.pixel_to_detuning(0) == pytest.approx(0.0, abs=1e-12)

    def test_detuning_decreases_with_index(self, tofs):
        # wavelength grows along the pixel axis, angular frequency falls
        pm = PixelMap(tofs)
        d = pm.pixel_to_detuning(np.array([-1, 0, 1]))
        assert d[0] > d[1] > d[2]

    def test_pixel_range(self, tofs):
        pm = PixelMap(tofs)
        lo, hi = pm.pixel_range()
        assert (lo, hi) == (-50, 50)
        assert pm.pixel_to_wavelength(hi) <= 830.0 + 0.5 * tofs.window

    def test_detuning_to_wavelength_exact(self):
        d = np.linspace(-3.0, 3.0, 7)
        lam = detuning_to_wavelength(d, 830.0)
        back = TWO_PI_C / lam - angular_frequency(830.0)
        assert np.allclose(back, d, atol=1e-12)


class TestFreqToTime:
    def test_deterministic_without_jitter(self):
        cfg = TofsConfig(dispersion=1000.0, center_wavelength=830.0, tdc_bin=100.0)
        lam = 830.0 + np.array([-0.3, 0.0, 0.2])
        tags, kept = freq_to_time(lam, cfg)
        assert kept.all()
        assert np.array_equal(pixelize(tags, cfg), [-3, 0, 2])
        again, _ = freq_to_time(lam, cfg)
        assert np.array_equal(tags, again)

    def test_tags_nonnegative_across_window(self):
        cfg = TofsConfig(dispersion=1000.0, center_wavelength=830.0, tdc_bin=100.0)
        lam = 830.0 + np.linspace(-5.0, 5.0, 201)
        tags, kept = freq_to_time(lam, cfg)
        assert kept.all()
        assert tags.min() >= 0

    def test_window_mask(self):
        cfg = TofsConfig(dispersion=1000.0, center_wavelength=830.0, window=10.0)
        lam = np.array([824.9, 825.0, 830.0, 835.0, 835.1])
        tags, kept = freq_to_time(lam, cfg)
        assert kept.tolist() == [False, True, True, True, False]
        assert tags.shape == (3,)

    def test_jitter_requires_rng(self, tofs):
        with pytest.raises(ValueError):
            freq_to_time([830.0], tofs)

    def test_jitter_spreads_tags(self):
        cfg = TofsConfig(
            dispersion=1000.0, center_wavelength=830.0, jitter_fwhm=300.0, tdc_bin=100.0
        )
        rng = np.random.default_rng(11)
        tags, _ = freq_to_time(np.full(40000, 830.0), cfg, rng=rng)
        # tick variance follows the jitter plus quantization composite
        expect = np.hypot(cfg.jitter_sigma, cfg.tdc_bin / np.sqrt(12.0)) / cfg.tdc_bin
        assert np.std(tags) == pytest.approx(expect, rel=0.05)
        assert np.mean(tags) == pytest.approx(cfg.offset_ticks, abs=0.05)

    def test_small_jitter_stays_in_pixel(self):
        # jitter well under half a TDC bin almost never crosses a pixel edge
        cfg = TofsConfig(
            dispersion=1000.0, center_wavelength=830.0, jitter_fwhm=20.0, tdc_bin=100.0
        )
        rng = np.random.default_rng(3)
        tags, _ = freq_to_time(np.full(2000, 830.0), cfg, rng=rng)
        assert np.all(pixelize(tags, cfg) == 0)


class TestPixelHistogram:
    def test_counts_by_pixel(self):
        cfg = TofsConfig(dispersion=1000.0, center_wavelength=830.0, tdc_bin=100.0)
        lam = 830.0 + 0.1 * np.array([0, 0, 0, 5, 5, -7])
        tags, _ = freq_to_time(lam, cfg)
        pixels, counts = pixel_histogram(tags, cfg)
        lo, hi = PixelMap(cfg).pixel_range()
        assert pixels[0] == lo and pixels[-1] == hi
        assert counts.sum() == 6
        assert counts[np.searchsorted(pixels, 0)] == 3
        assert counts[np.searchsorted(pixels, 5)] == 2
        assert counts[np.searchsorted(pixels, -7)] == 1

    def test_out_of_range_tags_dropped(self):
        cfg = TofsConfig(dispersion=1000.0, center_wavelength=830.0, tdc_bin=100.0)
        bogus = np.array([0, 10_000])
        _, counts = pixel_histogram(bogus, cfg)
        assert counts.sum() == 1
