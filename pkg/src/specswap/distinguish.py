"""Two-source distinguishability: overlaps, herald visibilities, phase fringes.

Swapping needs the two sources to emit indistinguishable pairs.  The
figures of merit here are the joint-amplitude overlap of the two
sources, the per-herald interference visibility it permits, and the
pump-phase fringes that measure the overlap directly: single-pair
cross-source interference oscillates with the pump phase difference,
double-pair interference at exactly twice that frequency.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import FrequencyGrid, simpson_weights
from .heralding import heralded_mode
from .jsa import GaussianJSA, JSAModel
from .observables import FringeTrace


@dataclass(frozen=True)
class ShiftedJSA:
    """A source whose joint amplitude is rigidly translated in frequency.

    Models alignment error between two otherwise identical sources: the
    amplitude is base(x - delta_s, y - delta_i) on the same carrier.
    """

    base: JSAModel
    delta_s: float = 0.0
    delta_i: float = 0.0

    @property
    def center(self) -> float:
        return self.base.center

    def amplitude(self, x, y):
        return self.base.amplitude(
            np.asarray(x) - self.delta_s, np.asarray(y) - self.delta_i
        )

    def sample(self, grid_s: FrequencyGrid, grid_i: FrequencyGrid) -> np.ndarray:
        return np.asarray(
            self.amplitude(grid_s.detunings[:, None], grid_i.detunings[None, :]),
            dtype=complex,
        )

    def _widen(self, grid: FrequencyGrid, shift: float) -> FrequencyGrid:
        if shift == 0.0:
            return grid
        factor = 1.0 + abs(shift) / grid.half_width
        return FrequencyGrid.symmetric(
            grid.center, grid.half_width * factor, grid.count,
            ref_bandwidth=grid.ref_bandwidth,
        )

    def default_grid_s(self, count: int = 512, sigmas: float = 5.5) -> FrequencyGrid:
        return self._widen(self.base.default_grid_s(count, sigmas), self.delta_s)

    def default_grid_i(self, count: int = 512, sigmas: float = 5.5) -> FrequencyGrid:
        return self._widen(self.base.default_grid_i(count, sigmas), self.delta_i)


def translated(jsa: JSAModel, delta_s: float = 0.0, delta_i: float = 0.0) -> ShiftedJSA:
    """Rigid translation of a source in the signal/idler detuning plane."""
    return ShiftedJSA(base=jsa, delta_s=float(delta_s), delta_i=float(delta_i))


def _shared_grids(jsa_a: JSAModel, jsa_b: JSAModel):
    ga, gia = jsa_a.default_grid_s(), jsa_a.default_grid_i()
    gb, gib = jsa_b.default_grid_s(), jsa_b.default_grid_i()
    gs = ga if ga.half_width >= gb.half_width else gb
    gi = gia if gia.half_width >= gib.half_width else gib
    return gs, gi


def source_overlap(jsa_a: JSAModel, jsa_b: JSAModel,
                   grid_s: FrequencyGrid | None = None,
                   grid_i: FrequencyGrid | None = None) -> complex:
    """Joint-amplitude overlap of two sources: II f_a* f_b dx dy."""
    if grid_s is None or grid_i is None:
        gs, gi = _shared_grids(jsa_a, jsa_b)
        grid_s = grid_s or gs
        grid_i = grid_i or gi
    fa = jsa_a.sample(grid_s, grid_i)
    fb = jsa_b.sample(grid_s, grid_i)
    ws = simpson_weights(grid_s.count, grid_s.spacing)
    wi = simpson_weights(grid_i.count, grid_i.spacing)
    return complex(np.einsum("a,ab,b->", ws, fa.conj() * fb, wi))


def translation_overlap_closed(jsa: GaussianJSA, delta_s: float,
                               delta_i: float) -> float:
    """Closed overlap of a Gaussian source with its rigid translation.

    exp[-d_s^2/(8 s_s^2) - a d_s d_i / 2 - d_i^2/(8 s_i^2)]; real and
    positive because the translated Gaussians share their phase.
    """
    if not isinstance(jsa, GaussianJSA):
        raise TypeError("closed form needs the Gaussian model")
    q = (
        delta_s**2 / (8.0 * jsa.sigma_s**2)
        + 0.5 * jsa.alpha * delta_s * delta_i
        + delta_i**2 / (8.0 * jsa.sigma_i**2)
    )
    return float(np.exp(-q))


def herald_visibility(jsa_a: JSAModel, jsa_b: JSAModel, herald_j: float,
                      herald_k: float,
                      grid: FrequencyGrid | None = None) -> float:
    """Upper bound on the swapped-state visibility at one herald pair.

    Product over the two herald bins of the magnitude of the overlap
    between the modes the two sources prepare there.  Taking magnitudes
    per factor absorbs a bin-dependent phase that a fixed measurement
    basis could in principle resolve; the bound is what phase-insensitive
    fringe contrast can reach.
    """
    if grid is None:
        grid = _shared_grids(jsa_a, jsa_b)[0]
    v = 1.0
    for h in (herald_j, herald_k):
        ma = heralded_mode(jsa_a, h, grid=grid, source=1)
        mb = heralded_mode(jsa_b, h, grid=grid, source=2)
        v *= abs(ma.overlap(mb))
    return float(v)


def exchange_term(jsa_a: JSAModel, jsa_b: JSAModel, axis: str = "signal",
                  grid_s: FrequencyGrid | None = None,
                  grid_i: FrequencyGrid | None = None) -> complex:
    """Photon-exchange contraction between the two sources on one axis.

    X = II C(w, w') C(w', w) dw dw' with the cross kernel C(a, b) =
    I f_a(a, O) f_b*(b, O) dO over the other axis.  For one source this
    is the reduced-state purity 1/K on either axis; between sources it
    sets the exchange corrections to double-pair interference.
    """
    if axis not in ("signal", "idler"):
        raise ValueError("axis must be 'signal' or 'idler'")
    if grid_s is None or grid_i is None:
        gs, gi = _shared_grids(jsa_a, jsa_b)
        grid_s = grid_s or gs
        grid_i = grid_i or gi
    fa = jsa_a.sample(grid_s, grid_i)
    fb = jsa_b.sample(grid_s, grid_i)
    ws = simpson_weights(grid_s.count, grid_s.spacing)
    wi = simpson_weights(grid_i.count, grid_i.spacing)
    if axis == "signal":
        c = fa @ (wi[:, None] * fb.conj().T)
        cw = c * ws[None, :]
    else:
        c = fa.T @ (ws[:, None] * fb.conj())
        cw = c * wi[None, :]
    return complex(np.einsum("ab,ba->", cw, cw))


def cross_purity(jsa_a: JSAModel, jsa_b: JSAModel, axis: str = "signal",
                 grid_s: FrequencyGrid | None = None,
                 grid_i: FrequencyGrid | None = None) -> float:
    """Tr(rho_a rho_b) of the two sources' reduced states on one axis.

    The two-photon interference of one photon from each source at a
    balanced splitter bunches with this probability excess; it equals the
    purity 1/K when the sources are identical.
    """
    if axis not in ("signal", "idler"):
        raise ValueError("axis must be 'signal' or 'idler'")
    if grid_s is None or grid_i is None:
        gs, gi = _shared_grids(jsa_a, jsa_b)
        grid_s = grid_s or gs
        grid_i = grid_i or gi
    fa = jsa_a.sample(grid_s, grid_i)
    fb = jsa_b.sample(grid_s, grid_i)
    ws = simpson_weights(grid_s.count, grid_s.spacing)
    wi = simpson_weights(grid_i.count, grid_i.spacing)
    if axis == "idler":
        fa, fb = fa.T, fb.T
        ws, wi = wi, ws
    ra = fa @ (wi[:, None] * fa.conj().T)
    rb = fb @ (wi[:, None] * fb.conj().T)
    tra = float(np.real(np.sum(ws * np.diag(ra))))
    trb = float(np.real(np.sum(ws * np.diag(rb))))
    val = np.real(np.einsum("a,ab,b,ba->", ws, ra, ws, rb))
    return float(val / (tra * trb))


def double_pair_overlap(jsa_a: JSAModel, jsa_b: JSAModel,
                        grid_s: FrequencyGrid | None = None,
                        grid_i: FrequencyGrid | None = None) -> complex:
    """Normalized overlap of the two-pair states of the two sources.

    (o~^2 + X) / sqrt((1 + 1/K_a)(1 + 1/K_b)) with o~ the conjugated
    single-pair overlap and X the exchange term; equal to one for
    identical sources and falling off roughly as the squared overlap.
    """
    if grid_s is None or grid_i is None:
        gs, gi = _shared_grids(jsa_a, jsa_b)
        grid_s = grid_s or gs
        grid_i = grid_i or gi
    o = np.conj(source_overlap(jsa_a, jsa_b, grid_s, grid_i))
    x = exchange_term(jsa_a, jsa_b, "signal", grid_s, grid_i)
    ka = exchange_term(jsa_a, jsa_a, "signal", grid_s, grid_i).real
    kb = exchange_term(jsa_b, jsa_b, "signal", grid_s, grid_i).real
    return complex((o**2 + x) / np.sqrt((1.0 + ka) * (1.0 + kb)))


def pump_phase_fringes(jsa_a: JSAModel, jsa_b: JSAModel, phases,
                       eta_a: float = 1.0, eta_b: float = 1.0,
                       port_sign: int = +1,
                       grid_s: FrequencyGrid | None = None,
                       grid_i: FrequencyGrid | None = None) -> FringeTrace:
    """Single-pair cross-source fringe vs pump phase difference.

    A lone pair from either source can reach one idler and one signal
    detector; the two source amplitudes interfere, so the pair rate at a
    fixed port pairing is (1 +- mu cos(dphi + arg o))/2 with visibility
    mu = 2 sqrt(eta_a eta_b) |o| / (eta_a + eta_b).  Opposite pairings
    take opposite signs and sum to a phase-independent constant.
    """
    if port_sign not in (+1, -1):
        raise ValueError("port_sign must be +1 or -1")
    phases = np.atleast_1d(np.asarray(phases, dtype=float))
    o = source_overlap(jsa_a, jsa_b, grid_s, grid_i)
    mu = 2.0 * np.sqrt(eta_a * eta_b) * abs(o) / (eta_a + eta_b)
    vals = 0.5 * (1.0 + port_sign * mu * np.cos(phases + np.angle(o)))
    return FringeTrace(
        delays=phases,
        values=np.clip(vals, 0.0, 1.0),
        meta={
            "axis": "pump_phase",
            "visibility": float(mu),
            "overlap_mag": float(abs(o)),
            "overlap_phase": float(np.angle(o)),
            "port_sign": port_sign,
        },
    )


def swapped_fourfold_probability(jsa_a: JSAModel, jsa_b: JSAModel,
                                 grid_s: FrequencyGrid | None = None,
                                 grid_i: FrequencyGrid | None = None) -> float:
    """Split-split probability of the one-pair-per-source class, zero delay.

    (1/4)[1 + |o|^2 - Tr(rho_s,a rho_s,b) - Tr(rho_i,a rho_i,b)]: the
    both-exchanged term interferes with weight |o|^2 while each splitter
    contributes its bunching excess.  Reduces to (1 - 1/K)/2 for
    identical sources.
    """
    o = source_overlap(jsa_a, jsa_b, grid_s, grid_i)
    xs = cross_purity(jsa_a, jsa_b, "signal", grid_s, grid_i)
    xi = cross_purity(jsa_a, jsa_b, "idler", grid_s, grid_i)
    return float(0.25 * (1.0 + abs(o) ** 2 - xs - xi))


def fourfold_phase_fringes(jsa_a: JSAModel, jsa_b: JSAModel, phases,
                           eta_a: float = 1.0, eta_b: float = 1.0) -> FringeTrace:
    """Fourfold rate vs pump phase difference, oscillating at 2 dphi.

    At the zero-delay operating point the swapped-pair class is phase
    inert; the two double-pair classes carry twice their pump phase, so
    their interference modulates the fourfold rate at exactly twice the
    single-pair fringe frequency.  Values are per-pulse fourfold
    probabilities.
    """
    phases = np.atleast_1d(np.asarray(phases, dtype=float))
    w12 = eta_a * eta_b * swapped_fourfold_probability(jsa_a, jsa_b)
    ka = exchange_term(jsa_a, jsa_a).real
    kb = exchange_term(jsa_b, jsa_b).real
    waa = eta_a**2 * (1.0 + ka) / 8.0
    wbb = eta_b**2 * (1.0 + kb) / 8.0
    kappa = double_pair_overlap(jsa_a, jsa_b)
    cross = 2.0 * np.sqrt(waa * wbb) * np.abs(kappa)
    vals = w12 + waa + wbb + cross * np.cos(2.0 * phases + np.angle(kappa))
    depth = cross / (w12 + waa + wbb)
    return FringeTrace(
        delays=phases,
        values=vals,
        meta={
            "axis": "pump_phase",
            "modulation_depth": float(depth),
            "frequency_ratio": 2.0,
            "pair_overlap": float(np.abs(kappa)),
        },
    )
