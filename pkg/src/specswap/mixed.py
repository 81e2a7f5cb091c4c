"""Finite idler resolution: band-integrated heralds and mixed states.

Real spectrometers resolve the herald frequencies only down to a pixel.
Heralding on a pixel pair (l, m) prepares not a pure swapped state but a
mixture of the ideal states over the band, weighted by the herald
density.  This module builds that mixture on Gauss-Legendre nodes, gives
its purity and band-averaged two-level coherence, and provides the
interference-visibility bound set by the heralded single-photon purity.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .grid import FrequencyGrid, simpson_weights
from .heralding import HeraldSetting, herald
from .jsa import GaussianJSA, JSAModel
from .instrument import FWHM_TO_SIGMA

GAUSS_SUPPORT_SIGMAS = 6.0


@dataclass(frozen=True)
class SpectralFilter:
    """Intensity transmission profile of one herald band.

    width is the full width for the rectangular shape and the intensity
    FWHM for the Gaussian shape.  Detunings are angular frequencies
    relative to the idler center.
    """

    center: float
    width: float
    shape: str = "rect"

    def __post_init__(self):
        if self.width <= 0:
            raise ValueError("filter width must be positive")
        if self.shape not in ("rect", "gauss"):
            raise ValueError(f"unknown filter shape {self.shape!r}")

    @property
    def sigma(self) -> float:
        """Gaussian-equivalent standard deviation of the profile."""
        if self.shape == "gauss":
            return self.width * FWHM_TO_SIGMA
        return self.width / np.sqrt(12.0)

    def transmission(self, detuning) -> np.ndarray:
        d = np.asarray(detuning, dtype=float) - self.center
        if self.shape == "rect":
            # half-open band so contiguous banks tile without double counting
            return np.where((d >= -0.5 * self.width) & (d < 0.5 * self.width), 1.0, 0.0)
        s = self.width * FWHM_TO_SIGMA
        return np.exp(-0.5 * (d / s) ** 2)

    def support(self) -> tuple[float, float]:
        """Interval carrying essentially all of the transmission."""
        if self.shape == "rect":
            half = 0.5 * self.width
        else:
            half = GAUSS_SUPPORT_SIGMAS * self.width * FWHM_TO_SIGMA
        return self.center - half, self.center + half


def rect_filter_bank(start: float, stop: float, width: float) -> list[SpectralFilter]:
    """Contiguous rectangular bands tiling [start, stop].

    The span must hold a whole number of bands; together they form a
    partition of unity on the covered range.
    """
    if stop <= start:
        raise ValueError("stop must exceed start")
    count = (stop - start) / width
    rounded = round(count)
    if rounded < 1 or abs(count - rounded) > 1e-9 * max(1.0, abs(count)):
        raise ValueError("band width must evenly divide the covered range")
    centers = start + width * (np.arange(rounded) + 0.5)
    return [SpectralFilter(center=float(c), width=width) for c in centers]


def bank_partition_defect(bank: list[SpectralFilter], detunings) -> float:
    """Max deviation of the summed transmission from one on the points."""
    total = np.zeros_like(np.asarray(detunings, dtype=float))
    for f in bank:
        total = total + f.transmission(detunings)
    return float(np.max(np.abs(total - 1.0)))


def band_nodes(filt: SpectralFilter, count: int = 16) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and transmission-folded weights for a band."""
    if count < 2:
        raise ValueError("need at least two quadrature nodes")
    x, w = np.polynomial.legendre.leggauss(count)
    lo, hi = filt.support()
    nodes = 0.5 * (hi - lo) * x + 0.5 * (hi + lo)
    weights = 0.5 * (hi - lo) * w * filt.transmission(nodes)
    return nodes, weights


def _columns(jsa: JSAModel, grid: FrequencyGrid, detunings: np.ndarray) -> np.ndarray:
    """Joint amplitude evaluated on grid points x herald detunings."""
    return np.asarray(
        jsa.amplitude(grid.detunings[:, None], np.asarray(detunings)[None, :]),
        dtype=complex,
    )


def _pair_quantities(jsa, grid, nodes_j, nodes_k, tau_i):
    """Mode norms, overlaps and herald densities on a node-pair lattice."""
    cols_j = _columns(jsa, grid, nodes_j)
    cols_k = _columns(jsa, grid, nodes_k)
    w = simpson_weights(grid.count, grid.spacing)
    nj = np.real(np.sum(w[:, None] * np.abs(cols_j) ** 2, axis=0))
    nk = np.real(np.sum(w[:, None] * np.abs(cols_k) ** 2, axis=0))
    # idler reduced kernel between the two node sets: rho[a, b]
    rho = (cols_j * w[:, None]).conj().T @ cols_k
    theta = (nodes_j[:, None] - nodes_k[None, :]) * tau_i
    p = 0.5 * (np.outer(nj, nk) - np.abs(rho) ** 2 * np.cos(theta))
    return cols_j, cols_k, w, nj, nk, rho, theta, np.clip(p, 0.0, None)


def band_probability(jsa: JSAModel, filter_j: SpectralFilter,
                     filter_k: SpectralFilter, tau_i: float = 0.0,
                     nodes: int = 16, grid: FrequencyGrid | None = None) -> float:
    """Herald probability integrated over a band pair."""
    if grid is None:
        grid = jsa.default_grid_s()
    xj, wj = band_nodes(filter_j, nodes)
    xk, wk = band_nodes(filter_k, nodes)
    *_, p = _pair_quantities(jsa, grid, xj, xk, tau_i)
    return float(wj @ p @ wk)


@dataclass(eq=False)
class MixedHeraldedState:
    """Heralded state for a finite band pair, as a node ensemble.

    member_p holds the herald density on the node lattice; weights are
    the Gauss-Legendre weights folded with the filter transmission.  The
    ensemble members are the pure heralded states at the node pairs,
    weighted by member_p; degenerate pairs carry zero weight and drop
    out of every average without special casing.
    """

    jsa: JSAModel
    filter_j: SpectralFilter
    filter_k: SpectralFilter
    tau_i: float
    grid: FrequencyGrid
    nodes_j: np.ndarray
    weights_j: np.ndarray
    nodes_k: np.ndarray
    weights_k: np.ndarray
    member_p: np.ndarray
    probability: float
    _cache: dict = field(default_factory=dict, repr=False)

    def member_weights(self) -> np.ndarray:
        """Ensemble weights: herald density times quadrature weights."""
        w = np.outer(self.weights_j, self.weights_k) * self.member_p
        return w / self.probability

    def _amplitude_weights(self) -> np.ndarray:
        """Weights of the unnormalized pair amplitudes.

        Each member enters averages as weight * |state><state| with the
        1/(2C) mode normalization.  Because the herald density carries
        the same C, the product w*p/(2C) = w*Nj*Nk/4 stays finite even
        where the pair degenerates, so no member needs excluding.
        """
        _, _, _, nj, nk, *_ = self._pair()
        w = np.outer(self.weights_j, self.weights_k)
        return w * np.outer(nj, nk) / (4.0 * self.probability)

    def _pair(self):
        if "pair" not in self._cache:
            self._cache["pair"] = _pair_quantities(
                self.jsa, self.grid, self.nodes_j, self.nodes_k, self.tau_i
            )
        return self._cache["pair"]

    def purity(self) -> float:
        """Tr(rho^2) of the band-averaged two-photon state."""
        cols_j, cols_k, w, nj, nk, rho, theta, _ = self._pair()
        phi_j = cols_j / np.sqrt(nj)[None, :]
        phi_k = cols_k / np.sqrt(nk)[None, :]
        ojj = (phi_j * w[:, None]).conj().T @ phi_j
        okk = (phi_k * w[:, None]).conj().T @ phi_k
        ojk = (phi_j * w[:, None]).conj().T @ phi_k
        g = self._amplitude_weights()
        # overlap of unnormalized members (a,b) and (a',b'):
        #   (1 + e^{i(th'-th)}) <a|a'><b|b'> - (e^{ith'} + e^{-ith}) <a|b'><b|a'>
        ph = np.exp(1j * theta)
        t1 = np.einsum("ac,bd->abcd", ojj, okk)
        t2 = np.einsum("ad,cb->abcd", ojk, ojk.conj())
        one = np.ones_like(ph)
        pref1 = np.einsum("ab,cd->abcd", one, ph) * np.einsum(
            "ab,cd->abcd", ph.conj(), one
        )
        num = (1.0 + pref1) * t1 - (
            np.einsum("ab,cd->abcd", one, ph)
            + np.einsum("ab,cd->abcd", ph.conj(), one)
        ) * t2
        val = np.einsum("ab,cd,abcd->", g, g, np.abs(num) ** 2)
        return float(np.real(val))

    def coherence_matrix(self) -> np.ndarray:
        """Band-averaged 2x2 matrix of the heralded qubit pair.

        Average of the members' coefficient matrices in the (|jk>, |kj>)
        basis; Hermitian and positive semidefinite by construction, with
        the off-diagonal magnitude shrinking as the dephasing across the
        band grows.
        """
        g = self._amplitude_weights()
        theta = self._pair()[6]
        d = float(np.sum(g))
        off = -np.sum(g * np.exp(-1j * theta))
        return np.array([[d, off], [np.conj(off), d]])

    def ensemble(self):
        """Yield (weight, HeraldedBellState) over nondegenerate members."""
        w = self.member_weights()
        for a, oj in enumerate(self.nodes_j):
            for b, ok in enumerate(self.nodes_k):
                if w[a, b] <= 0.0:
                    continue
                setting = HeraldSetting(float(oj), float(ok), self.tau_i)
                yield float(w[a, b]), herald(self.jsa, setting, grid=self.grid)


def mixed_heralded_state(jsa: JSAModel, filter_j: SpectralFilter,
                         filter_k: SpectralFilter, tau_i: float = 0.0,
                         nodes: int = 16,
                         grid: FrequencyGrid | None = None) -> MixedHeraldedState:
    """Build the band-pair mixture on a Gauss-Legendre node lattice."""
    if grid is None:
        grid = jsa.default_grid_s()
    xj, wj = band_nodes(filter_j, nodes)
    xk, wk = band_nodes(filter_k, nodes)
    *_, p = _pair_quantities(jsa, grid, xj, xk, tau_i)
    prob = float(wj @ p @ wk)
    if prob <= 0.0:
        raise ValueError("band pair has vanishing herald probability")
    return MixedHeraldedState(
        jsa=jsa, filter_j=filter_j, filter_k=filter_k, tau_i=tau_i,
        grid=grid, nodes_j=xj, weights_j=wj, nodes_k=xk, weights_k=wk,
        member_p=p, probability=prob,
    )


def mixed_jsi(state: MixedHeraldedState) -> np.ndarray:
    """Signal-pair spectral intensity averaged over the herald band pair.

    Uses the factorized form weight * density * JSI = |f f - e^{i theta}
    f f|^2 / 4, in which the member mode norms cancel, so degenerate
    members contribute zero rather than 0/0.
    """
    cols_j, cols_k, *_ = state._pair()
    wj, wk = state.weights_j, state.weights_k
    ti = state.tau_i
    pj = np.abs(cols_j) ** 2 @ wj
    pk = np.abs(cols_k) ** 2 @ wk
    ea = np.exp(1j * state.nodes_j * ti) * wj
    eb = np.exp(-1j * state.nodes_k * ti) * wk
    r1 = (cols_j.conj() * ea[None, :]) @ cols_j.T
    r2 = (cols_k * eb[None, :]) @ cols_k.conj().T
    dens = 0.25 * (np.outer(pj, pk) + np.outer(pk, pj) - 2.0 * np.real(r1 * r2))
    return np.clip(dens, 0.0, None) / state.probability


def mixed_fringes(state: MixedHeraldedState, tau_s) -> np.ndarray:
    """Split probability vs signal delay, averaged over the band pair.

    Same factorized trick as mixed_jsi: weight * p * P stays finite for
    every member, so the band average needs no degeneracy handling.
    """
    tau_s = np.atleast_1d(np.asarray(tau_s, dtype=float))
    cols_j, cols_k, w, nj, nk, rho, theta, _ = state._pair()
    grid = state.grid
    wj, wk = state.weights_j, state.weights_k
    x = grid.detunings
    out = np.empty(tau_s.shape, dtype=float)
    c = 1.0 - (np.abs(rho) ** 2 / np.outer(nj, nk)) * np.cos(theta)
    for i, t in enumerate(tau_s):
        phase = np.exp(1j * x * t) * w
        fj = phase @ np.abs(cols_j) ** 2
        fk = phase @ np.abs(cols_k) ** 2
        gjk = (cols_j.conj() * phase[:, None]).T @ cols_k
        gkj = (cols_k.conj() * phase[:, None]).T @ cols_j
        cross = np.real(np.exp(1j * theta) * np.outer(fj, fk.conj()))
        bunch = 0.5 * (np.abs(gjk) ** 2 + np.abs(gkj.T) ** 2)
        pp = 0.25 * (np.outer(nj, nk) * c + cross - bunch)
        out[i] = wj @ pp @ wk
    return np.clip(out / state.probability, 0.0, 1.0)


def hom_purity_bound(jsa: JSAModel, filter_j: SpectralFilter | None = None,
                     filter_k: SpectralFilter | None = None,
                     grid: FrequencyGrid | None = None,
                     nodes: int = 64) -> float:
    """Interference-visibility ceiling Tr(rho_j rho_k) of filtered heralds.

    rho_j is the signal state heralded through filter j (band-integrated,
    normalized).  With no filter the whole idler spectrum is accepted and
    the bound drops to the inverse Schmidt number; narrowing the filter
    purifies the herald and pushes the bound toward one.
    """
    if grid is None:
        grid = jsa.default_grid_s()
    w = simpson_weights(grid.count, grid.spacing)

    def kernel(filt: SpectralFilter | None) -> np.ndarray:
        if filt is None:
            igrid = jsa.default_grid_i()
            yn = igrid.detunings
            yw = simpson_weights(igrid.count, igrid.spacing)
        else:
            yn, yw = band_nodes(filt, nodes)
        cols = _columns(jsa, grid, yn)
        return (cols * yw[None, :]) @ cols.conj().T

    rj = kernel(filter_j)
    rk = rj if filter_k is None else kernel(filter_k)
    trj = float(np.real(np.sum(w * np.diag(rj))))
    trk = float(np.real(np.sum(w * np.diag(rk))))
    num = np.real(np.einsum("a,ab,b,ba->", w, rj, w, rk))
    return float(num / (trj * trk))


def gaussian_filter_purity(jsa: GaussianJSA, filter_sigma: float) -> float:
    """Closed-form heralded purity for a Gaussian filter of std sigma.

    The filter acts as an effective idler width 1/sigma_eff^2 = 1/sigma^2
    + 1/sigma_i^2; the purity is the inverse Schmidt number of the
    correspondingly decorrelated state.  Independent of filter center.
    """
    if not isinstance(jsa, GaussianJSA):
        raise TypeError("closed form needs the Gaussian model")
    if filter_sigma <= 0:
        raise ValueError("filter sigma must be positive")
    s_eff_sq = (filter_sigma**2 * jsa.sigma_i**2) / (
        filter_sigma**2 + jsa.sigma_i**2
    )
    return float(np.sqrt(1.0 - 4.0 * jsa.alpha**2 * jsa.sigma_s**2 * s_eff_sq))


def band_purity_reduced(jsa: GaussianJSA, filt: SpectralFilter,
                        nodes: int = 96) -> float:
    """Filtered-herald purity via the analytically reduced band integral.

    For the Gaussian model the signal trace integrals are exact, leaving
    purity = [II dy dy' q(y) q(y') exp(a^2 s^2 (y+y')^2 - (y^2+y'^2) /
    (2 s_i^2))] / [I dy q(y) exp(-y^2 / (2 K^2 s_i^2))]^2 over the band
    profile q.  Shares nothing with the kernel-trace route, so the two
    cross-check each other.
    """
    if not isinstance(jsa, GaussianJSA):
        raise TypeError("reduced form needs the Gaussian model")
    y, wq = band_nodes(filt, nodes)
    a2s2 = (jsa.alpha * jsa.sigma_s) ** 2
    marg = jsa.marginal_sigma_i
    den = np.sum(wq * np.exp(-0.5 * (y / marg) ** 2))
    yy = y[:, None] + y[None, :]
    expo = a2s2 * yy**2 - (y[:, None] ** 2 + y[None, :] ** 2) / (
        2.0 * jsa.sigma_i**2
    )
    num = np.einsum("a,b,ab->", wq, wq, np.exp(expo))
    return float(num / den**2)
