"""Time-of-flight spectrometer chain: dispersion, jitter, TDC, pixels.

A photon's wavelength is mapped to an arrival time by a large group-delay
dispersion (fiber spool or chirped fiber Bragg grating), smeared by
detector jitter, and quantized by a time-to-digital converter.  Because
the TDC bin T and the dispersion D are constant, quantized time tags are
integer spectral pixels of size T/D nanometers, with pixel 0 at the
center wavelength.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import TWO_PI_C, angular_frequency

# Gaussian FWHM in units of the standard deviation
FWHM_TO_SIGMA = 1.0 / (2.0 * np.sqrt(2.0 * np.log(2.0)))


@dataclass(frozen=True)
class TofsConfig:
    """One detection channel of the time-of-flight spectrometer.

    dispersion in ps/nm, center_wavelength in nm, jitter_fwhm and tdc_bin
    in ps, window (full spectral acceptance) in nm, insertion_loss in dB.
    """

    dispersion: float
    center_wavelength: float
    jitter_fwhm: float = 0.0
    tdc_bin: float = 100.0
    window: float = 10.0
    insertion_loss_db: float = 0.0

    def __post_init__(self):
        if self.dispersion <= 0:
            raise ValueError("dispersion must be positive")
        if self.center_wavelength <= 0:
            raise ValueError("center wavelength must be positive")
        if self.tdc_bin <= 0:
            raise ValueError("TDC bin must be positive")
        if self.window <= 0:
            raise ValueError("spectral window must be positive")
        if self.jitter_fwhm < 0 or self.insertion_loss_db < 0:
            raise ValueError("jitter and insertion loss must be nonnegative")

    @property
    def spectral_resolution(self) -> float:
        """Pixel size in nm: TDC bin over dispersion."""
        return self.tdc_bin / self.dispersion

    @property
    def jitter_sigma(self) -> float:
        """Jitter standard deviation (ps), from the quoted FWHM."""
        return self.jitter_fwhm * FWHM_TO_SIGMA

    @property
    def transmission(self) -> float:
        """Power survival probability of the insertion loss."""
        return 10.0 ** (-self.insertion_loss_db / 10.0)

    @property
    def clock_offset(self) -> float:
        """Delay (ps) placing the full window at nonnegative times.

        Chosen as a whole number of TDC bins so that the offset never
        shifts events within a pixel.
        """
        raw = 0.5 * self.dispersion * self.window
        return float(np.ceil(raw / self.tdc_bin) * self.tdc_bin)

    @property
    def offset_ticks(self) -> int:
        return int(round(self.clock_offset / self.tdc_bin))

    def jitter_blur_sigma(self) -> float:
        """Std (rad/ps) of the spectral blur from jitter plus quantization.

        Composite response variance = jitter sigma^2 + T^2/12 (uniform
        quantization error), converted from time to wavelength through the
        dispersion and then to angular frequency at the center wavelength.
        """
        sigma_t = float(np.hypot(self.jitter_sigma, self.tdc_bin / np.sqrt(12.0)))
        sigma_nm = sigma_t / self.dispersion
        return sigma_nm * TWO_PI_C / self.center_wavelength**2


@dataclass(frozen=True)
class PixelMap:
    """Affine map between pixel index, wavelength and angular detuning.

    Index 0 sits at the center wavelength; one pixel is one TDC bin worth
    of dispersion-mapped spectrum.  Wavelength increases with index, so
    angular detuning decreases with index.
    """

    tofs: TofsConfig

    @property
    def pixel_nm(self) -> float:
        return self.tofs.spectral_resolution

    @property
    def center_detuning(self) -> float:
        return 0.0

    def pixel_to_wavelength(self, pixel) -> np.ndarray:
        return self.tofs.center_wavelength + np.asarray(pixel) * self.pixel_nm

    def wavelength_to_pixel(self, wavelength_nm) -> np.ndarray:
        rel = (np.asarray(wavelength_nm) - self.tofs.center_wavelength) / self.pixel_nm
        return np.rint(rel).astype(int)

    def pixel_to_detuning(self, pixel) -> np.ndarray:
        """Angular detuning (rad/ps) at a pixel center."""
        lam = self.pixel_to_wavelength(pixel)
        return TWO_PI_C / lam - angular_frequency(self.tofs.center_wavelength)

    def detuning_to_pixel(self, detuning) -> np.ndarray:
        w0 = angular_frequency(self.tofs.center_wavelength)
        lam = TWO_PI_C / (w0 + np.asarray(detuning))
        return self.wavelength_to_pixel(lam)

    def pixel_range(self) -> tuple[int, int]:
        """Inclusive pixel bounds inside the spectral window."""
        half = int(np.floor(0.5 * self.tofs.window / self.pixel_nm))
        return -half, half


def detuning_to_wavelength(detuning, center_wavelength: float) -> np.ndarray:
    """Exact wavelength (nm) of an angular detuning about a center (nm)."""
    w0 = angular_frequency(center_wavelength)
    return TWO_PI_C / (w0 + np.asarray(detuning, dtype=float))


def freq_to_time(wavelength_nm, cfg: TofsConfig,
                 rng: np.random.Generator | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Dispersive frequency-to-time conversion with jitter and TDC.

    Returns (tags, kept): integer TDC tags (units of cfg.tdc_bin, offset by
    the clock so tags are nonnegative) and a boolean mask of photons inside
    the spectral window.  Out-of-window photons produce no tag.
    """
    lam = np.atleast_1d(np.asarray(wavelength_nm, dtype=float))
    kept = np.abs(lam - cfg.center_wavelength) <= 0.5 * cfg.window
    t = cfg.dispersion * (lam[kept] - cfg.center_wavelength) + cfg.clock_offset
    if cfg.jitter_fwhm > 0:
        if rng is None:
            raise ValueError("jitter requires an RNG")
        t = t + rng.normal(0.0, cfg.jitter_sigma, size=t.shape)
    tags = np.rint(t / cfg.tdc_bin).astype(np.int64)
    return tags, kept


def pixelize(tags, cfg: TofsConfig) -> np.ndarray:
    """Spectral pixel of each TDC tag (pixel 0 at the center wavelength)."""
    return np.asarray(tags, dtype=np.int64) - cfg.offset_ticks


def pixel_histogram(tags, cfg: TofsConfig) -> tuple[np.ndarray, np.ndarray]:
    """Counts per pixel over the spectral window, densely indexed."""
    lo, hi = PixelMap(cfg).pixel_range()
    pix = pixelize(tags, cfg)
    pix = pix[(pix >= lo) & (pix <= hi)]
    counts = np.bincount(pix - lo, minlength=hi - lo + 1)
    return np.arange(lo, hi + 1), counts
