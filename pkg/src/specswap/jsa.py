"""Joint spectral amplitude models and single-photon reduced states.

A photon-pair source is described by its joint spectral amplitude
f(omega_s, omega_i).  Everything downstream (heralded modes, interference
observables, event sampling) is computed from f.  Three models are
provided:

* ``GaussianJSA`` -- correlated Gaussian in the detunings x = omega_s - w0
  and y = omega_i - w0,

      f(x, y) = C exp[-x^2/(4 sigma_s^2) - alpha x y - y^2/(4 sigma_i^2)],

  where sigma_s (sigma_i) is the cross-sectional width of the intensity
  |f|^2 along the signal (idler) axis at fixed conjugate frequency, and
  alpha > 0 produces the anticorrelation characteristic of a narrowband
  pump.  All second-moment and overlap quantities have closed forms that
  serve as oracles for the quadrature paths.

* ``SincJSA`` -- Gaussian pump envelope times a sinc phase-matching
  function, with a matched-Gaussian conversion (equal intensity FWHM).

* ``GriddedJSA`` -- tabulated amplitudes, normalized by quadrature.

Units: angular frequency in rad/ps, time in ps.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

import numpy as np
from scipy.ndimage import gaussian_filter

from .grid import FrequencyGrid, integrate_2d, simpson_weights

# half-max argument of sinc^2 and the equal-FWHM Gaussian exponent factor:
# sinc(z)^2 = 1/2 at z = SINC_HALF_MAX, and exp(-2 g z^2) = 1/2 at the same
# point for g = ln2 / (2 z^2).
SINC_HALF_MAX = 1.39155737825151
SINC_GAUSS_FACTOR = np.log(2.0) / (2.0 * SINC_HALF_MAX**2)

# largest fraction of the quadrature mass tolerated on the outermost grid
# rows/columns of a sampled intensity; more than this and the grid visibly
# truncates the amplitude (heavy but integrable tails, e.g. sinc lobes,
# stay well below it on the default grids)
_EDGE_MASS_LIMIT = 1e-4


def _support_error(name: str, axis: str) -> ValueError:
    return ValueError(
        f"{name}: grid along the {axis} axis truncates the amplitude "
        "(the outermost samples carry a non-negligible share of the "
        "quadrature mass); enlarge the grid"
    )


def _check_support(intensity: np.ndarray, grid_s: FrequencyGrid,
                   grid_i: FrequencyGrid, name: str) -> None:
    ws = simpson_weights(grid_s.count, grid_s.spacing)
    wi = simpson_weights(grid_i.count, grid_i.spacing)
    total = float(ws @ intensity @ wi)
    if total <= 0:
        raise ValueError(f"{name}: amplitude is identically zero")
    edge_s = float(ws[0] * (intensity[0, :] @ wi) + ws[-1] * (intensity[-1, :] @ wi))
    edge_i = float((ws @ intensity[:, 0]) * wi[0] + (ws @ intensity[:, -1]) * wi[-1])
    if edge_s > _EDGE_MASS_LIMIT * total:
        raise _support_error(name, "signal")
    if edge_i > _EDGE_MASS_LIMIT * total:
        raise _support_error(name, "idler")


@dataclass(frozen=True)
class GaussianJSA:
    """Correlated-Gaussian joint spectral amplitude.

    Parameters
    ----------
    center:
        Carrier angular frequency w0 (rad/ps), common to signal and idler.
    sigma_s, sigma_i:
        Cross-sectional (conditional) intensity widths (rad/ps).
    alpha:
        Frequency-correlation coefficient ((rad/ps)^-2).  Positive values
        anticorrelate signal and idler.  Integrability requires
        4 alpha^2 sigma_s^2 sigma_i^2 < 1, which is exactly the condition
        that the Hessian of the exponent be negative definite.
    """

    center: float
    sigma_s: float
    sigma_i: float
    alpha: float

    def __post_init__(self):
        if self.center <= 0:
            raise ValueError("center frequency must be positive")
        if self.sigma_s <= 0 or self.sigma_i <= 0:
            raise ValueError("sigma_s and sigma_i must be positive")
        det = 1.0 / (4 * self.sigma_s**2 * self.sigma_i**2) - self.alpha**2
        if det <= 0:
            raise ValueError(
                "exponent Hessian is not negative definite "
                f"(4 a^2 ss^2 si^2 = {4*self.alpha**2*self.sigma_s**2*self.sigma_i**2:.6g} >= 1); "
                "the amplitude is not normalizable"
            )

    # ------------------------------------------------------------------
    # closed-form scalars

    @property
    def norm(self) -> float:
        """Normalization constant C such that the L2 norm of f is 1."""
        det = 1.0 / (4 * self.sigma_s**2 * self.sigma_i**2) - self.alpha**2
        return det**0.25 / np.sqrt(np.pi)

    @property
    def schmidt_number(self) -> float:
        """K = 1 / sqrt(1 - 4 alpha^2 sigma_s^2 sigma_i^2)."""
        return 1.0 / np.sqrt(1.0 - 4 * self.alpha**2 * self.sigma_s**2 * self.sigma_i**2)

    @property
    def purity(self) -> float:
        """Single-photon purity Tr(rho^2) = 1/K."""
        return 1.0 / self.schmidt_number

    @property
    def marginal_sigma_s(self) -> float:
        """Standard deviation of the signal intensity marginal (= K sigma_s)."""
        return self.schmidt_number * self.sigma_s

    @property
    def marginal_sigma_i(self) -> float:
        return self.schmidt_number * self.sigma_i

    @property
    def mode_slope(self) -> float:
        """d(signal mode center)/d(herald detuning) = -2 alpha sigma_s^2."""
        return -2.0 * self.alpha * self.sigma_s**2

    def conditional_center(self, herald_detuning: float | np.ndarray):
        """Signal-mode center detuning when heralding an idler at `herald_detuning`."""
        return self.mode_slope * np.asarray(herald_detuning, dtype=float)

    @property
    def intensity_covariance(self) -> np.ndarray:
        """2x2 covariance matrix of |f|^2 over (signal, idler) detunings."""
        k2 = self.schmidt_number**2
        return np.array(
            [
                [k2 * self.sigma_s**2, -2 * self.alpha * self.sigma_s**2 * self.sigma_i**2 * k2],
                [-2 * self.alpha * self.sigma_s**2 * self.sigma_i**2 * k2, k2 * self.sigma_i**2],
            ]
        )

    def blurred_schmidt_number(self, blur_sigma: float) -> float:
        """Schmidt number the intensity would show after an isotropic
        Gaussian detector blur of standard deviation `blur_sigma` (rad/ps).

        For a Gaussian intensity the Schmidt number depends only on the
        correlation coefficient of its covariance matrix,
        K = 1/sqrt(1 - corr^2), and blurring adds blur_sigma^2 to the
        diagonal of the covariance.
        """
        if blur_sigma < 0:
            raise ValueError("blur_sigma must be nonnegative")
        cov = self.intensity_covariance + blur_sigma**2 * np.eye(2)
        corr2 = cov[0, 1] ** 2 / (cov[0, 0] * cov[1, 1])
        return 1.0 / np.sqrt(1.0 - corr2)

    # ------------------------------------------------------------------
    # amplitudes and reduced kernels

    def amplitude(self, x, y):
        """f at signal detuning x and idler detuning y (broadcasting)."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        expo = (
            -(x**2) / (4 * self.sigma_s**2)
            - self.alpha * x * y
            - (y**2) / (4 * self.sigma_i**2)
        )
        return self.norm * np.exp(expo)

    def sample(self, grid_s: FrequencyGrid, grid_i: FrequencyGrid) -> np.ndarray:
        """Amplitude samples on the outer product of two grids (signal axis 0)."""
        return self.amplitude(grid_s.detunings[:, None], grid_i.detunings[None, :])

    def rho_s(self, x, xp):
        """Closed-form signal reduced kernel rho_s(x, x').

        rho_s(x, x') = C^2 sqrt(2 pi) sigma_i
                       exp[-(x^2 + x'^2)/(4 sigma_s^2)
                           + alpha^2 sigma_i^2 (x + x')^2 / 2]
        """
        x = np.asarray(x, dtype=float)
        xp = np.asarray(xp, dtype=float)
        pref = self.norm**2 * np.sqrt(2 * np.pi) * self.sigma_i
        expo = (
            -(x**2 + xp**2) / (4 * self.sigma_s**2)
            + 0.5 * self.alpha**2 * self.sigma_i**2 * (x + xp) ** 2
        )
        return pref * np.exp(expo)

    def rho_i(self, y, yp):
        """Closed-form idler reduced kernel (signal formula with s <-> i)."""
        y = np.asarray(y, dtype=float)
        yp = np.asarray(yp, dtype=float)
        pref = self.norm**2 * np.sqrt(2 * np.pi) * self.sigma_s
        expo = (
            -(y**2 + yp**2) / (4 * self.sigma_i**2)
            + 0.5 * self.alpha**2 * self.sigma_s**2 * (y + yp) ** 2
        )
        return pref * np.exp(expo)

    def idler_spectral_density(self, y):
        """rho_i(y, y): probability density of the idler detuning."""
        return self.rho_i(y, y)

    def default_grid_s(self, count: int = 512, sigmas: float = 5.5) -> FrequencyGrid:
        """Symmetric signal grid covering `sigmas` marginal standard deviations."""
        hw = sigmas * max(self.marginal_sigma_s, self.sigma_s)
        return FrequencyGrid.symmetric(self.center, hw, count, ref_bandwidth=self.sigma_s)

    def default_grid_i(self, count: int = 512, sigmas: float = 5.5) -> FrequencyGrid:
        hw = sigmas * max(self.marginal_sigma_i, self.sigma_i)
        return FrequencyGrid.symmetric(self.center, hw, count, ref_bandwidth=self.sigma_i)


@dataclass(frozen=True)
class SincJSA:
    """Gaussian pump envelope times a sinc phase-matching function.

    f(x, y) = C exp[-(x + y)^2 / (4 pump_sigma^2)]
                sinc[length (slope_s x + slope_i y) / 2]

    `slope_s` and `slope_i` are the group-delay mismatch slopes between each
    daughter photon and the pump (ps/mm); `length` is the crystal length in
    mm, so the sinc argument is dimensionless.
    """

    center: float
    pump_sigma: float
    slope_s: float
    slope_i: float
    length: float

    def __post_init__(self):
        if self.center <= 0 or self.pump_sigma <= 0 or self.length <= 0:
            raise ValueError("center, pump_sigma and length must be positive")
        # the matched Gaussian must itself be integrable, which also
        # guarantees the sinc model decays in every direction
        m = self.matched_gaussian()
        object.__setattr__(self, "_norm", None)
        _ = m  # construction already validates

    def matched_gaussian(self) -> GaussianJSA:
        """Gaussian model whose intensity FWHM matches the sinc lobe.

        sinc(z) is replaced by exp(-g z^2) with g chosen so that the
        intensity half-maximum points coincide; expanding the exponent in
        (x, y) gives the correlated-Gaussian parameters.
        """
        g = SINC_GAUSS_FACTOR
        inv_ss2 = 1.0 / self.pump_sigma**2 + g * (self.length * self.slope_s) ** 2
        inv_si2 = 1.0 / self.pump_sigma**2 + g * (self.length * self.slope_i) ** 2
        alpha = 0.5 / self.pump_sigma**2 + 0.5 * g * self.length**2 * self.slope_s * self.slope_i
        return GaussianJSA(
            center=self.center,
            sigma_s=1.0 / np.sqrt(inv_ss2),
            sigma_i=1.0 / np.sqrt(inv_si2),
            alpha=alpha,
        )

    def _raw(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        pump = np.exp(-((x + y) ** 2) / (4 * self.pump_sigma**2))
        z = 0.5 * self.length * (self.slope_s * x + self.slope_i * y)
        return pump * np.sinc(z / np.pi)

    @property
    def norm(self) -> float:
        """Normalization constant from quadrature on the default grids."""
        cached = getattr(self, "_norm", None)
        if cached is None:
            gs = self.default_grid_s()
            gi = self.default_grid_i()
            raw = self._raw(gs.detunings[:, None], gi.detunings[None, :])
            total = integrate_2d(np.abs(raw) ** 2, gs, gi)
            object.__setattr__(self, "_norm", 1.0 / np.sqrt(total))
            cached = self._norm
        return cached

    def amplitude(self, x, y):
        return self.norm * self._raw(x, y)

    def sample(self, grid_s: FrequencyGrid, grid_i: FrequencyGrid) -> np.ndarray:
        return self.amplitude(grid_s.detunings[:, None], grid_i.detunings[None, :])

    def default_grid_s(self, count: int = 512, sigmas: float = 5.5) -> FrequencyGrid:
        m = self.matched_gaussian()
        # widen a little: sinc sidelobes decay slower than the Gaussian
        hw = 1.5 * sigmas * max(m.marginal_sigma_s, m.sigma_s)
        return FrequencyGrid.symmetric(self.center, hw, count, ref_bandwidth=m.sigma_s)

    def default_grid_i(self, count: int = 512, sigmas: float = 5.5) -> FrequencyGrid:
        m = self.matched_gaussian()
        hw = 1.5 * sigmas * max(m.marginal_sigma_i, m.sigma_i)
        return FrequencyGrid.symmetric(self.center, hw, count, ref_bandwidth=m.sigma_i)


class GriddedJSA:
    """Tabulated joint spectral amplitude, normalized by quadrature."""

    def __init__(self, grid_s: FrequencyGrid, grid_i: FrequencyGrid,
                 values: np.ndarray, normalize: bool = True):
        values = np.asarray(values, dtype=complex)
        if values.shape != (grid_s.count, grid_i.count):
            raise ValueError(
                f"values shape {values.shape} does not match grids "
                f"({grid_s.count}, {grid_i.count})"
            )
        if not np.all(np.isfinite(values)):
            raise ValueError("amplitude samples contain NaN or Inf")
        intensity = np.abs(values) ** 2
        _check_support(intensity, grid_s, grid_i, "GriddedJSA")
        if normalize:
            total = integrate_2d(intensity, grid_s, grid_i)
            values = values / np.sqrt(total)
        self.grid_s = grid_s
        self.grid_i = grid_i
        self.values = values
        self.center = grid_s.center

    def _interpolator(self):
        from scipy.interpolate import RegularGridInterpolator

        return RegularGridInterpolator(
            (self.grid_s.detunings, self.grid_i.detunings),
            self.values,
            bounds_error=False,
            fill_value=0.0,
        )

    def amplitude(self, x, y):
        """Bilinear interpolation of the tabulated amplitude (0 outside)."""
        x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
        pts = np.stack([x, y], axis=-1)
        return self._interpolator()(pts)

    def sample(self, grid_s: FrequencyGrid, grid_i: FrequencyGrid) -> np.ndarray:
        if grid_s is self.grid_s and grid_i is self.grid_i:
            return self.values
        xs, ys = np.meshgrid(grid_s.detunings, grid_i.detunings, indexing="ij")
        return self._interpolator()(np.stack([xs, ys], axis=-1))

    def default_grid_s(self, count: int = 512, sigmas: float = 5.5) -> FrequencyGrid:
        return self.grid_s

    def default_grid_i(self, count: int = 512, sigmas: float = 5.5) -> FrequencyGrid:
        return self.grid_i


JSAModel = Union[GaussianJSA, SincJSA, GriddedJSA]


def build_jsa(model: str, **params) -> JSAModel:
    """Factory for amplitude models ("gaussian", "sinc" or "gridded")."""
    if model == "gaussian":
        return GaussianJSA(**params)
    if model == "sinc":
        return SincJSA(**params)
    if model == "gridded":
        return GriddedJSA(**params)
    raise ValueError(f"unknown JSA model {model!r}")


# ----------------------------------------------------------------------
# reduced density matrices


@dataclass(eq=False)
class ReducedDensityMatrix:
    """Single-photon reduced state on a frequency grid.

    `values[i, j]` approximates rho(x_i, x_j); the trace is taken with the
    grid's quadrature weights and equals 1 for an adequately resolved
    amplitude.
    """

    grid: FrequencyGrid
    values: np.ndarray
    trace_deviation: float = field(default=0.0)

    def __post_init__(self):
        v = np.asarray(self.values)
        if v.shape != (self.grid.count, self.grid.count):
            raise ValueError("kernel shape does not match grid")
        herm = np.max(np.abs(v - v.conj().T))
        scale = max(np.max(np.abs(v)), 1e-300)
        if herm > 1e-10 * scale:
            raise ValueError(f"kernel is not Hermitian (max asymmetry {herm:.3e})")
        self.values = v

    @property
    def weights(self) -> np.ndarray:
        return simpson_weights(self.grid.count, self.grid.spacing)

    def trace(self) -> float:
        return float(np.real(np.sum(self.weights * np.diag(self.values))))

    def purity(self) -> float:
        """Tr(rho^2) via the weighted double sum."""
        w = self.weights
        m = self.values * w[None, :]
        return float(np.real(np.trace(m @ m)))

    def eigenvalues(self) -> np.ndarray:
        """Eigenvalues of the weighted kernel, descending."""
        sq = np.sqrt(self.weights)
        sym = sq[:, None] * self.values * sq[None, :]
        ev = np.linalg.eigvalsh(sym)
        return ev[::-1]


def reduced_density(jsa: JSAModel, which: str = "signal",
                    grid: FrequencyGrid | None = None,
                    method: str = "auto") -> ReducedDensityMatrix:
    """Trace out one photon: rho_s(x,x') = int dy f(x,y) f*(x',y].

    method "quadrature" integrates sampled amplitudes with Simpson weights;
    "closed" uses the Gaussian-model formula (Gaussian JSAs only); "auto"
    prefers the closed form when available.

    Raises ValueError when the quadrature trace deviates from 1 by more
    than 1e-3, which indicates an undersampled or truncated grid.
    """
    if which not in ("signal", "idler"):
        raise ValueError("which must be 'signal' or 'idler'")
    closed_available = isinstance(jsa, GaussianJSA)
    if method == "auto":
        method = "closed" if closed_available else "quadrature"
    if method == "closed":
        if not closed_available:
            raise ValueError("closed-form reduced density requires a Gaussian model")
        if grid is None:
            grid = jsa.default_grid_s() if which == "signal" else jsa.default_grid_i()
        x = grid.detunings
        kernel = jsa.rho_s(x[:, None], x[None, :]) if which == "signal" else \
            jsa.rho_i(x[:, None], x[None, :])
        rdm = ReducedDensityMatrix(grid, kernel)
    elif method == "quadrature":
        if grid is None:
            grid = jsa.default_grid_s() if which == "signal" else jsa.default_grid_i()
        other = jsa.default_grid_i() if which == "signal" else jsa.default_grid_s()
        if which == "signal":
            f = jsa.sample(grid, other)  # (kept, integrated)
        else:
            f = jsa.sample(other, grid).T
        w = simpson_weights(other.count, other.spacing)
        kernel = (f * w[None, :]) @ f.conj().T
        kernel = 0.5 * (kernel + kernel.conj().T)
        rdm = ReducedDensityMatrix(grid, kernel)
    else:
        raise ValueError(f"unknown method {method!r}")
    dev = abs(rdm.trace() - 1.0)
    if dev > 1e-3:
        raise ValueError(
            f"reduced-density trace deviates from 1 by {dev:.3e}; "
            "the grid undersamples or truncates the amplitude"
        )
    rdm.trace_deviation = dev
    return rdm


# ----------------------------------------------------------------------
# Schmidt decomposition


@dataclass(eq=False)
class SchmidtDecomposition:
    """Schmidt coefficients and mode functions of a two-photon amplitude."""

    coefficients: np.ndarray
    modes_s: np.ndarray  # modes_s[n, i] on grid_s
    modes_i: np.ndarray
    grid_s: FrequencyGrid
    grid_i: FrequencyGrid

    @property
    def number(self) -> float:
        """Schmidt number K = 1 / sum(lambda^4) with sum(lambda^2) = 1."""
        lam2 = self.coefficients**2
        return float(1.0 / np.sum(lam2**2))


def schmidt_decompose(jsa: JSAModel,
                      grid_s: FrequencyGrid | None = None,
                      grid_i: FrequencyGrid | None = None,
                      modes: int = 16) -> SchmidtDecomposition:
    """Quadrature-weighted SVD of the sampled amplitude.

    The amplitude samples are scaled by the square roots of the quadrature
    weights so that singular vectors are orthonormal in the L2 sense; the
    singular values are normalized to unit sum of squares.
    """
    gs = grid_s or jsa.default_grid_s()
    gi = grid_i or jsa.default_grid_i()
    f = np.asarray(jsa.sample(gs, gi))
    intensity = np.abs(f) ** 2
    _check_support(intensity, gs, gi, "schmidt_decompose")
    ws = np.sqrt(simpson_weights(gs.count, gs.spacing))
    wi = np.sqrt(simpson_weights(gi.count, gi.spacing))
    b = ws[:, None] * f * wi[None, :]
    u, s, vh = np.linalg.svd(b, full_matrices=False)
    lam = s / np.sqrt(np.sum(s**2))
    n = min(modes, s.size)
    return SchmidtDecomposition(
        coefficients=lam[:n],
        modes_s=(u[:, :n] / ws[:, None]).T,
        modes_i=(vh[:n, :] / wi[None, :]),
        grid_s=gs,
        grid_i=gi,
    )


def blurred_intensity(jsa: JSAModel, blur_sigma: float,
                      grid_s: FrequencyGrid | None = None,
                      grid_i: FrequencyGrid | None = None) -> np.ndarray:
    """|f|^2 convolved with an isotropic Gaussian of std `blur_sigma` (rad/ps).

    Models a detector-resolution-limited intensity measurement.
    """
    gs = grid_s or jsa.default_grid_s()
    gi = grid_i or jsa.default_grid_i()
    intensity = np.abs(jsa.sample(gs, gi)) ** 2
    if blur_sigma == 0:
        return intensity
    return gaussian_filter(
        intensity,
        sigma=(blur_sigma / gs.spacing, blur_sigma / gi.spacing),
        mode="constant",
    )


def intensity_schmidt_number(intensity: np.ndarray, grid_s: FrequencyGrid,
                             grid_i: FrequencyGrid) -> float:
    """Schmidt number inferred from an intensity map.

    The measured intensity is treated the way an experimental analysis
    treats a measured joint spectrum: take the pointwise square root as a
    flat-phase amplitude estimate and decompose it.
    """
    amp = np.sqrt(np.clip(np.asarray(intensity, dtype=float), 0.0, None))
    ws = np.sqrt(simpson_weights(grid_s.count, grid_s.spacing))
    wi = np.sqrt(simpson_weights(grid_i.count, grid_i.spacing))
    s = np.linalg.svd(ws[:, None] * amp * wi[None, :], compute_uv=False)
    lam2 = s**2 / np.sum(s**2)
    return float(1.0 / np.sum(lam2**2))


def gaussian_sigma_for_blurred_schmidt(k_intrinsic: float, k_blurred: float,
                                       blur_sigma: float) -> float:
    """Symmetric-model width that degrades K to `k_blurred` under a blur.

    For sigma_s = sigma_i = sigma, the blurred correlation coefficient is
    corr / (1 + blur^2 / (K^2 sigma^2)), so the requested pair (K, K_b)
    fixes sigma.  Used to produce the shipped fitted configurations.
    """
    if not (1.0 < k_blurred < k_intrinsic):
        raise ValueError("need 1 < k_blurred < k_intrinsic")
    corr = np.sqrt(1.0 - 1.0 / k_intrinsic**2)
    corr_b = np.sqrt(1.0 - 1.0 / k_blurred**2)
    u = corr / corr_b - 1.0
    return float(blur_sigma / (k_intrinsic * np.sqrt(u)))
