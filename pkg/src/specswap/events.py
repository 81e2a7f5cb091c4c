"""Monte Carlo time-tag streams for the four-channel swapping run.

Each pump pulse emits, with small probability, photon pairs from one or
both sources.  Per pulse the simulator draws an emission class - one
pair per source (the swapped class), two pairs from a single source
(background), or a lone pair - then routes the photons through the
idler mixer and either the signal mixer (verification) or straight to
the spectrometers (jsi), and finally through the dispersive
time-of-flight chain of each channel.

Sampling is exact for the swapped class: herald pairs come from the
interference-weighted coincidence map by gridded inverse transform with
in-cell jitter, and signal pairs from the heralded joint density by
rejection from its exchange-symmetrized envelope.  Double-pair classes
draw two pairs independently (exchange interference between same-source
pairs is dropped, but their class weight keeps the exact two-pair norm)
and route photons independently; under a fixed pump phase the routing
signs of the two mixers are drawn jointly so the fourfold rate carries
the double-pair interference at twice the pump phase difference.

Streams are reproducible and thread-count independent: pulses are
processed in fixed-size blocks, each with its own counter-based
substream keyed by (seed, salt, block), and merged in block order.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .grid import FrequencyGrid, simpson_weights
from .instrument import TofsConfig, detuning_to_wavelength, freq_to_time, pixelize
from .jsa import JSAModel
from .mixed import _pair_quantities

CHANNELS = ("c", "d", "x", "y")
CHANNEL_INDEX = {name: i for i, name in enumerate(CHANNELS)}
CLASS_NAMES = ("swap", "double_1", "double_2", "single_1", "single_2")
CLASS_INDEX = {name: i for i, name in enumerate(CLASS_NAMES)}

DEFAULT_BLOCK = 1 << 16


@dataclass(frozen=True)
class ExperimentConfig:
    """Full description of one simulated run.

    Both sources share the spectral model `jsa` (source mismatch is an
    analysis-side study); they may differ in brightness.  `tofs` and
    `efficiency` map channel names to the per-channel instrument chain
    and detection probability.
    """

    jsa: JSAModel
    eta_1: float
    eta_2: float
    pulses: int
    seed: int
    tau_s: float = 0.0
    tau_i: float = 0.0
    measurement: str = "verification"
    pump_mode: str = "averaged"
    pump_phase: float = 0.0
    tofs: dict = field(default_factory=dict)
    efficiency: dict = field(default_factory=dict)
    herald_cells: int = 256
    signal_cells: int = 512
    block_pulses: int = DEFAULT_BLOCK

    def __post_init__(self):
        if self.eta_1 < 0 or self.eta_2 < 0:
            raise ValueError("emission probabilities must be nonnegative")
        if self.pulses < 1:
            raise ValueError("need at least one pulse")
        if self.measurement not in ("verification", "jsi"):
            raise ValueError(f"unknown measurement mode {self.measurement!r}")
        if self.pump_mode not in ("averaged", "fixed"):
            raise ValueError(f"unknown pump mode {self.pump_mode!r}")
        for ch in self.tofs:
            if ch not in CHANNELS:
                raise ValueError(f"unknown channel {ch!r} in tofs map")
        for ch, val in self.efficiency.items():
            if ch not in CHANNELS:
                raise ValueError(f"unknown channel {ch!r} in efficiency map")
            if not 0.0 <= val <= 1.0:
                raise ValueError("efficiencies must lie in [0, 1]")
        if self.herald_cells < 8 or self.signal_cells < 8:
            raise ValueError("sampling lattices need at least 8 cells")
        if self.block_pulses < 1:
            raise ValueError("block size must be positive")

    def channel_efficiency(self, ch: str) -> float:
        return float(self.efficiency.get(ch, 1.0))

    def channel_tofs(self, ch: str) -> TofsConfig | None:
        return self.tofs.get(ch)


@dataclass(eq=False)
class EventStream:
    """Flat per-click record of a run plus ground-truth labels.

    Parallel arrays: pulse index, channel code (order c, d, x, y), TDC
    tag (channel units; -1 when that channel has no instrument model, in
    which case `detuning` keeps the exact frequency), emission class of
    the parent pulse.  `summary` counts generated and lost photons.
    """

    pulse: np.ndarray
    channel: np.ndarray
    tag: np.ndarray
    detuning: np.ndarray
    klass: np.ndarray
    pulses: int
    summary: dict

    def __len__(self) -> int:
        return int(self.pulse.shape[0])

    def select_classes(self, names) -> "EventStream":
        codes = [CLASS_INDEX[n] for n in names]
        keep = np.isin(self.klass, codes)
        return EventStream(
            pulse=self.pulse[keep], channel=self.channel[keep],
            tag=self.tag[keep], detuning=self.detuning[keep],
            klass=self.klass[keep], pulses=self.pulses,
            summary=dict(self.summary),
        )

    def channel_pulses(self, ch: str) -> np.ndarray:
        """Sorted pulse indices with at least one click on a channel."""
        sel = self.channel == CHANNEL_INDEX[ch]
        return np.unique(self.pulse[sel])

    def coincident_pulses(self, channels) -> np.ndarray:
        """Pulses with clicks on every listed channel."""
        out = None
        for ch in channels:
            p = self.channel_pulses(ch)
            out = p if out is None else np.intersect1d(out, p, assume_unique=True)
        return out if out is not None else np.empty(0, dtype=np.int64)

    def first_values(self, pulses: np.ndarray, ch: str,
                     what: str = "tag") -> np.ndarray:
        """First click's tag (or detuning) on a channel for given pulses."""
        sel = self.channel == CHANNEL_INDEX[ch]
        p = self.pulse[sel]
        v = self.tag[sel] if what == "tag" else self.detuning[sel]
        order = np.argsort(p, kind="stable")
        p, v = p[order], v[order]
        idx = np.searchsorted(p, pulses, side="left")
        if np.any(idx >= p.size) or np.any(p[np.minimum(idx, p.size - 1)] != pulses):
            raise ValueError("a requested pulse has no click on the channel")
        return v[idx]


@dataclass(eq=False)
class CoincidenceHistogram:
    """Counts on a pixel lattice with Poisson errors.

    axes holds one pixel-index array per dimension; meta records the
    channel names and pixel calibration so exports are self-describing.
    """

    axes: tuple
    counts: np.ndarray
    total_pulses: int
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        shape = tuple(len(a) for a in self.axes)
        if self.counts.shape != shape:
            raise ValueError("count array does not match the axes")

    @property
    def errors(self) -> np.ndarray:
        base = self.meta.get("variance")
        if base is not None:
            return np.sqrt(base)
        return np.sqrt(np.clip(self.counts, 0.0, None))


def _block_rng(seed: int, salt: int, block: int) -> np.random.Generator:
    if not 0 <= salt < (1 << 31) or not 0 <= block < (1 << 31):
        raise ValueError("salt and block index must fit in 31 bits")
    return np.random.Generator(
        np.random.Philox(key=[np.uint64(seed), (np.uint64(salt) << np.uint64(32))
                              | np.uint64(block)])
    )


class _CellSampler1D:
    """Inverse-CDF sampling of a density known on a uniform lattice."""

    def __init__(self, centers: np.ndarray, weights: np.ndarray):
        w = np.clip(np.asarray(weights, dtype=float), 0.0, None)
        total = w.sum()
        if total <= 0:
            raise ValueError("density has no support on the lattice")
        self.centers = centers
        self.spacing = float(centers[1] - centers[0])
        self.cdf = np.cumsum(w) / total

    def sample(self, rng: np.random.Generator, n: int,
               jitter: bool = True) -> tuple[np.ndarray, np.ndarray]:
        idx = np.searchsorted(self.cdf, rng.random(n), side="right")
        idx = np.minimum(idx, len(self.centers) - 1)
        vals = self.centers[idx]
        if jitter:
            vals = vals + self.spacing * (rng.random(n) - 0.5)
        return idx, vals


class _CellSampler2D:
    """Inverse-CDF sampling of a 2-d density on a product lattice."""

    def __init__(self, centers_a, centers_b, weights):
        w = np.clip(np.asarray(weights, dtype=float), 0.0, None)
        total = w.sum()
        if total <= 0:
            raise ValueError("density has no support on the lattice")
        self.centers_a = centers_a
        self.centers_b = centers_b
        self.spacing_a = float(centers_a[1] - centers_a[0])
        self.spacing_b = float(centers_b[1] - centers_b[0])
        self.shape = w.shape
        self.cdf = np.cumsum(w.ravel()) / total

    def sample(self, rng: np.random.Generator, n: int, jitter: bool = True):
        flat = np.searchsorted(self.cdf, rng.random(n), side="right")
        flat = np.minimum(flat, self.cdf.size - 1)
        ia, ib = np.unravel_index(flat, self.shape)
        va = self.centers_a[ia]
        vb = self.centers_b[ib]
        if jitter:
            va = va + self.spacing_a * (rng.random(n) - 0.5)
            vb = vb + self.spacing_b * (rng.random(n) - 0.5)
        return ia, ib, va, vb


class _SwapTables:
    """Precomputed lattices for the swapped-pair class.

    Herald lattice over the idler detunings with the split/bunch
    coincidence densities, normalized signal modes per herald cell, and
    the split probability per cell at the configured signal delay.
    """

    def __init__(self, jsa: JSAModel, tau_s: float, tau_i: float,
                 herald_cells: int, signal_cells: int):
        sgrid = jsa.default_grid_s(count=signal_cells)
        igrid = jsa.default_grid_i(count=herald_cells)
        lattice = igrid.detunings
        cols, _, w, nj, _, rho, theta, p_split = _pair_quantities(
            jsa, sgrid, lattice, lattice, tau_i
        )
        self.sgrid = sgrid
        self.lattice = lattice
        self.cell = igrid.spacing
        self.norms = nj
        self.modes = cols / np.sqrt(nj)[None, :]
        self.theta = theta
        self.overlap = rho / np.sqrt(np.outer(nj, nj))
        self.c_norm = 1.0 - np.abs(self.overlap) ** 2 * np.cos(theta)
        self.p_split = p_split
        self.p_bunch = 0.5 * (
            np.outer(nj, nj) + np.abs(rho) ** 2 * np.cos(theta)
        )
        cellsq = self.cell**2
        self.split_fraction = float(
            p_split.sum() * cellsq
            / (p_split.sum() * cellsq + self.p_bunch.sum() * cellsq)
        )
        self.split_sampler = _CellSampler2D(lattice, lattice, p_split)
        self.bunch_sampler = _CellSampler2D(lattice, lattice, self.p_bunch)
        # per-cell mode intensity CDFs for signal-frequency proposals
        intens = np.abs(self.modes) ** 2
        self.mode_cdf = np.cumsum(intens * w[:, None], axis=0)
        self.mode_cdf /= self.mode_cdf[-1, :][None, :]
        # split probability per herald cell at the configured delay
        phase = np.exp(1j * sgrid.detunings * tau_s) * w
        ft = phase @ intens
        gmat = (self.modes.conj() * phase[:, None]).T @ self.modes
        cross = np.real(np.exp(1j * theta) * np.outer(ft, ft.conj()))
        bunch = 0.5 * (np.abs(gmat) ** 2 + np.abs(gmat.T) ** 2)
        with np.errstate(invalid="ignore", divide="ignore"):
            pjk = 0.5 + (cross - bunch) / (2.0 * self.c_norm)
        np.fill_diagonal(pjk, 0.5)
        self.split_prob = np.clip(np.nan_to_num(pjk, nan=0.5), 0.0, 1.0)
        self.jsa = jsa

    def mode_values(self, cell_idx: np.ndarray, omegas: np.ndarray) -> np.ndarray:
        """Normalized heralded-mode amplitude at arbitrary frequencies."""
        cols = np.asarray(
            self.jsa.amplitude(omegas, self.lattice[cell_idx]), dtype=complex
        )
        return cols / np.sqrt(self.norms[cell_idx])

    def sample_mode_freq(self, rng, cell_idx: np.ndarray) -> np.ndarray:
        """Draw one frequency per entry from that cell's mode intensity."""
        u = rng.random(cell_idx.size)
        out = np.empty(cell_idx.size, dtype=float)
        x = self.sgrid.detunings
        dx = self.sgrid.spacing
        for cell in np.unique(cell_idx):
            sel = cell_idx == cell
            idx = np.searchsorted(self.mode_cdf[:, cell], u[sel], side="right")
            idx = np.minimum(idx, x.size - 1)
            out[sel] = x[idx] + dx * (rng.random(int(sel.sum())) - 0.5)
        return out

    def sample_signal_pair(self, rng, ia: np.ndarray, ib: np.ndarray,
                           sign: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Exact joint signal frequencies for heralded cells (ia, ib).

        Rejection from the exchange-symmetrized proposal: draw (w1 from
        mode a, w2 from mode b) or the swap with equal odds, accept with
        |m_a(w1) m_b(w2) - s e^{i theta} m_b(w1) m_a(w2)|^2 over twice
        the proposal envelope; `sign` +1 selects the idler-split
        (interference-minus) state, -1 the idler-bunched companion.
        """
        n = ia.size
        w1 = np.empty(n, dtype=float)
        w2 = np.empty(n, dtype=float)
        pending = np.arange(n)
        phase = np.exp(1j * self.theta[ia, ib]) * np.where(sign > 0, 1.0, -1.0)
        rounds = 0
        while pending.size:
            pa, pb = ia[pending], ib[pending]
            flip = rng.random(pending.size) < 0.5
            ca = np.where(flip, pb, pa)
            cb = np.where(flip, pa, pb)
            t1 = self.sample_mode_freq(rng, ca)
            t2 = self.sample_mode_freq(rng, cb)
            ma = self.mode_values(pa, t1) * self.mode_values(pb, t2)
            mb = self.mode_values(pb, t1) * self.mode_values(pa, t2)
            num = np.abs(ma - phase[pending] * mb) ** 2
            env = 2.0 * (np.abs(ma) ** 2 + np.abs(mb) ** 2)
            accept = rng.random(pending.size) * env <= num
            w1[pending[accept]] = t1[accept]
            w2[pending[accept]] = t2[accept]
            pending = pending[~accept]
            rounds += 1
            if rounds > 100000:
                raise RuntimeError("signal-pair rejection failed to converge")
        return w1, w2


class _PairTables:
    """Sampler for one pair drawn from the bare joint intensity."""

    def __init__(self, jsa: JSAModel, signal_cells: int, herald_cells: int):
        sgrid = jsa.default_grid_s(count=signal_cells)
        igrid = jsa.default_grid_i(count=herald_cells)
        f = jsa.sample(sgrid, igrid)
        self.sampler = _CellSampler2D(
            sgrid.detunings, igrid.detunings, np.abs(f) ** 2
        )

    def sample(self, rng, n: int) -> tuple[np.ndarray, np.ndarray]:
        _, _, ws, wi = self.sampler.sample(rng, n)
        return ws, wi


def _schmidt_number(jsa: JSAModel) -> float:
    k = getattr(jsa, "schmidt_number", None)
    if k is not None:
        return float(k)
    from .jsa import reduced_density

    return 1.0 / reduced_density(jsa, "signal").purity()


def class_weights(cfg: ExperimentConfig) -> np.ndarray:
    """Per-pulse probabilities of the five emission classes.

    Swapped pairs at eta1*eta2; each double-pair class at
    eta^2 (1 + 1/K) / 2, the exact two-pair norm of a squeezed source;
    lone pairs at eta.  The remainder is vacuum.
    """
    k = _schmidt_number(cfg.jsa)
    boost = 0.5 * (1.0 + 1.0 / k)
    w = np.array([
        cfg.eta_1 * cfg.eta_2,
        cfg.eta_1**2 * boost,
        cfg.eta_2**2 * boost,
        cfg.eta_1,
        cfg.eta_2,
    ])
    if w.sum() > 1.0:
        raise ValueError("pump too bright: class weights exceed unit probability")
    return w


@dataclass(eq=False)
class _RunContext:
    cfg: ExperimentConfig
    weights: np.ndarray
    swap: _SwapTables | None
    pair: _PairTables | None
    single_vis: float
    double_mod: float
    salt: int = 0


def _prepare(cfg: ExperimentConfig, salt: int = 0) -> _RunContext:
    w = class_weights(cfg)
    swap = None
    if w[0] > 0:
        swap = _SwapTables(
            cfg.jsa, cfg.tau_s, cfg.tau_i, cfg.herald_cells, cfg.signal_cells
        )
    pair = None
    if w[1:].sum() > 0:
        pair = _PairTables(cfg.jsa, cfg.signal_cells, cfg.herald_cells)
    fixed = cfg.pump_mode == "fixed"
    single_vis = 0.0
    double_mod = 0.0
    if fixed and cfg.eta_1 > 0 and cfg.eta_2 > 0:
        single_vis = 2.0 * np.sqrt(cfg.eta_1 * cfg.eta_2) / (cfg.eta_1 + cfg.eta_2)
        # both sources share one spectral model, so the two-pair overlap is 1
        double_mod = 2.0 * np.sqrt(w[1] * w[2]) / (w[1] + w[2])
    return _RunContext(
        cfg=cfg, weights=w, swap=swap, pair=pair,
        single_vis=single_vis, double_mod=double_mod, salt=salt,
    )


class _BlockEvents:
    """Accumulates raw photons of one block before the instrument."""

    def __init__(self):
        self.pulse = []
        self.channel = []
        self.detuning = []
        self.klass = []

    def add(self, pulse, channel_code, detuning, klass_code):
        pulse = np.asarray(pulse, dtype=np.int64)
        n = pulse.shape[0]
        if n == 0:
            return
        self.pulse.append(pulse)
        ch = np.asarray(channel_code)
        self.channel.append(
            np.full(n, ch, dtype=np.int8) if ch.ndim == 0
            else ch.astype(np.int8)
        )
        self.detuning.append(np.asarray(detuning, dtype=float))
        kl = np.asarray(klass_code)
        self.klass.append(
            np.full(n, kl, dtype=np.int8) if kl.ndim == 0
            else kl.astype(np.int8)
        )

    def arrays(self):
        if not self.pulse:
            empty = np.empty(0)
            return (empty.astype(np.int64), empty.astype(np.int8),
                    empty.astype(float), empty.astype(np.int8))
        return (np.concatenate(self.pulse), np.concatenate(self.channel),
                np.concatenate(self.detuning), np.concatenate(self.klass))


def _routing_signs(rng, n: int, modulation: float, cos_term: float):
    """Joint split/bunch signs of the two mixers for background pairs.

    Marginals stay 50/50 split (twofold rates carry no phase); the
    product of signs is biased by modulation * cos_term, which encodes
    the double-pair interference in the fourfold rate alone.
    """
    si = np.where(rng.random(n) < 0.5, -1, 1)
    p_split_x = 0.5 * (1.0 - modulation * si * cos_term)
    sx = np.where(rng.random(n) < p_split_x, -1, 1)
    return si, sx


def _emit_swap(ctx: _RunContext, rng, ev: _BlockEvents, pulses: np.ndarray):
    cfg, tab = ctx.cfg, ctx.swap
    n = pulses.size
    if n == 0:
        return
    split = rng.random(n) < tab.split_fraction
    for branch, idx in (("split", np.where(split)[0]),
                        ("bunch", np.where(~split)[0])):
        m = idx.size
        if m == 0:
            continue
        p = pulses[idx]
        sampler = tab.split_sampler if branch == "split" else tab.bunch_sampler
        ia, ib, oa, ob = sampler.sample(rng, m)
        if branch == "split":
            ev.add(p, CHANNEL_INDEX["c"], oa, CLASS_INDEX["swap"])
            ev.add(p, CHANNEL_INDEX["d"], ob, CLASS_INDEX["swap"])
            sign = np.ones(m)
        else:
            port = np.where(rng.random(m) < 0.5,
                            CHANNEL_INDEX["c"], CHANNEL_INDEX["d"])
            ev.add(p, port, oa, CLASS_INDEX["swap"])
            ev.add(p, port, ob, CLASS_INDEX["swap"])
            sign = -np.ones(m)
        w1, w2 = tab.sample_signal_pair(rng, ia, ib, sign)
        if cfg.measurement == "jsi":
            ev.add(p, CHANNEL_INDEX["x"], w1, CLASS_INDEX["swap"])
            ev.add(p, CHANNEL_INDEX["y"], w2, CLASS_INDEX["swap"])
            continue
        if branch == "split":
            ps = tab.split_prob[ia, ib]
        else:
            # idler-bunched pulses never form fourfolds; an unbiased
            # splitter is an adequate stand-in for their signal routing
            ps = np.full(m, 0.5)
        s_split = rng.random(m) < ps
        port1 = np.where(s_split, CHANNEL_INDEX["x"],
                         np.where(rng.random(m) < 0.5,
                                  CHANNEL_INDEX["x"], CHANNEL_INDEX["y"]))
        port2 = np.where(s_split, CHANNEL_INDEX["y"], port1)
        ev.add(p, port1, w1, CLASS_INDEX["swap"])
        ev.add(p, port2, w2, CLASS_INDEX["swap"])


def _emit_double(ctx: _RunContext, rng, ev: _BlockEvents, pulses: np.ndarray,
                 which: int):
    cfg = ctx.cfg
    n = pulses.size
    if n == 0:
        return
    klass = CLASS_INDEX["double_1"] if which == 1 else CLASS_INDEX["double_2"]
    s1, i1 = ctx.pair.sample(rng, n)
    s2, i2 = ctx.pair.sample(rng, n)
    cos2 = np.cos(2.0 * cfg.pump_phase)
    modulation = ctx.double_mod if cfg.measurement == "verification" else 0.0
    si, sx = _routing_signs(rng, n, modulation, cos2)
    # idler pair: split sends one photon to each mixer output
    bunch_i = si > 0
    port_i1 = np.where(bunch_i,
                       np.where(rng.random(n) < 0.5, CHANNEL_INDEX["c"],
                                CHANNEL_INDEX["d"]),
                       CHANNEL_INDEX["c"])
    port_i2 = np.where(bunch_i, port_i1, CHANNEL_INDEX["d"])
    ev.add(pulses, port_i1, i1, klass)
    ev.add(pulses, port_i2, i2, klass)
    if cfg.measurement == "jsi":
        own = CHANNEL_INDEX["x"] if which == 1 else CHANNEL_INDEX["y"]
        ev.add(pulses, own, s1, klass)
        ev.add(pulses, own, s2, klass)
        return
    bunch_x = sx > 0
    port_s1 = np.where(bunch_x,
                       np.where(rng.random(n) < 0.5, CHANNEL_INDEX["x"],
                                CHANNEL_INDEX["y"]),
                       CHANNEL_INDEX["x"])
    port_s2 = np.where(bunch_x, port_s1, CHANNEL_INDEX["y"])
    ev.add(pulses, port_s1, s1, klass)
    ev.add(pulses, port_s2, s2, klass)


def _emit_single(ctx: _RunContext, rng, ev: _BlockEvents, pulses: np.ndarray,
                 which: int):
    cfg = ctx.cfg
    n = pulses.size
    if n == 0:
        return
    klass = CLASS_INDEX["single_1"] if which == 1 else CLASS_INDEX["single_2"]
    ws, wi = ctx.pair.sample(rng, n)
    if cfg.measurement == "jsi":
        port_i = np.where(rng.random(n) < 0.5, CHANNEL_INDEX["c"],
                          CHANNEL_INDEX["d"])
        own = CHANNEL_INDEX["x"] if which == 1 else CHANNEL_INDEX["y"]
        ev.add(pulses, port_i, wi, klass)
        ev.add(pulses, own, ws, klass)
        return
    # verification: lone-pair amplitudes of the two sources interfere,
    # correlating idler and signal ports at the pump phase difference
    vis = ctx.single_vis * np.cos(cfg.pump_phase)
    u = rng.random(n)
    p_pp = 0.25 * (1.0 + vis)
    p_pm = 0.25 * (1.0 - vis)
    edges = np.cumsum([p_pp, p_pm, p_pm, p_pp])
    pattern = np.searchsorted(edges, u * edges[-1], side="right")
    pattern = np.minimum(pattern, 3)
    port_i = np.where(pattern < 2, CHANNEL_INDEX["c"], CHANNEL_INDEX["d"])
    port_s = np.where(pattern % 2 == 0, CHANNEL_INDEX["x"], CHANNEL_INDEX["y"])
    ev.add(pulses, port_i, wi, klass)
    ev.add(pulses, port_s, ws, klass)


def _apply_instrument(cfg: ExperimentConfig, rng, pulse, channel, detuning,
                      klass, losses: dict):
    """Efficiency, window, jitter and TDC per channel; drops lost photons."""
    n = pulse.shape[0]
    keep = np.ones(n, dtype=bool)
    tag = np.full(n, -1, dtype=np.int64)
    for name in CHANNELS:
        code = CHANNEL_INDEX[name]
        sel = np.where(channel == code)[0]
        if sel.size == 0:
            continue
        eff = cfg.channel_efficiency(name)
        tofs = cfg.channel_tofs(name)
        if tofs is not None:
            eff *= tofs.transmission
        if eff < 1.0:
            survive = rng.random(sel.size) < eff
            losses["efficiency"] += int(np.sum(~survive))
            keep[sel[~survive]] = False
            sel = sel[survive]
        if tofs is None or sel.size == 0:
            continue
        lam = detuning_to_wavelength(detuning[sel], tofs.center_wavelength)
        tags, inside = freq_to_time(lam, tofs, rng)
        losses["window"] += int(np.sum(~inside))
        keep[sel[~inside]] = False
        tag[sel[inside]] = tags
    order = np.lexsort((tag[keep], channel[keep], pulse[keep]))
    p, c = pulse[keep][order], channel[keep][order]
    t, d, k = tag[keep][order], detuning[keep][order], klass[keep][order]
    # non-number-resolving detectors: one click per channel per pulse
    first = np.ones(p.shape[0], dtype=bool)
    first[1:] = (p[1:] != p[:-1]) | (c[1:] != c[:-1])
    losses["merged"] += int(np.sum(~first))
    return p[first], c[first], t[first], d[first], k[first]


def _simulate_block(ctx: _RunContext, block: int) -> dict:
    cfg = ctx.cfg
    start = block * cfg.block_pulses
    n = min(cfg.block_pulses, cfg.pulses - start)
    rng = _block_rng(cfg.seed, ctx.salt, block)
    u = rng.random(n)
    edges = np.cumsum(ctx.weights)
    cls = np.searchsorted(edges, u, side="right")
    ev = _BlockEvents()
    pulse_of = lambda code: start + np.where(cls == code)[0].astype(np.int64)
    class_counts = np.array([int(np.sum(cls == i)) for i in range(5)])
    _emit_swap(ctx, rng, ev, pulse_of(0))
    _emit_double(ctx, rng, ev, pulse_of(1), 1)
    _emit_double(ctx, rng, ev, pulse_of(2), 2)
    _emit_single(ctx, rng, ev, pulse_of(3), 1)
    _emit_single(ctx, rng, ev, pulse_of(4), 2)
    pulse, channel, detuning, klass = ev.arrays()
    losses = {"efficiency": 0, "window": 0, "merged": 0}
    p, c, t, d, k = _apply_instrument(
        cfg, rng, pulse, channel, detuning, klass, losses
    )
    return {
        "pulse": p, "channel": c, "tag": t, "detuning": d, "klass": k,
        "losses": losses, "class_counts": class_counts,
    }


def sample_events(cfg: ExperimentConfig, threads: int = 1,
                  salt: int = 0) -> EventStream:
    """Simulate the run and return the merged, ordered time-tag stream.

    `threads` caps the number of worker processes; the stream is
    byte-identical for any value because every block owns a
    counter-based substream and blocks merge in index order.
    """
    if threads < 1:
        raise ValueError("threads must be positive")
    ctx = _prepare(cfg, salt=salt)
    blocks = list(range((cfg.pulses + cfg.block_pulses - 1) // cfg.block_pulses))
    if threads == 1 or len(blocks) == 1:
        results = [_simulate_block(ctx, b) for b in blocks]
    else:
        from concurrent.futures import ProcessPoolExecutor
        from functools import partial

        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(partial(_simulate_block, ctx), blocks))
    losses = {"efficiency": 0, "window": 0, "merged": 0}
    class_counts = np.zeros(5, dtype=np.int64)
    for r in results:
        for key in losses:
            losses[key] += r["losses"][key]
        class_counts += r["class_counts"]
    cat = lambda key: (np.concatenate([r[key] for r in results])
                       if results else np.empty(0))
    summary = {
        "pulses": cfg.pulses,
        "losses": losses,
        "class_pulses": {
            name: int(class_counts[i]) for i, name in enumerate(CLASS_NAMES)
        },
    }
    return EventStream(
        pulse=cat("pulse").astype(np.int64),
        channel=cat("channel").astype(np.int8),
        tag=cat("tag").astype(np.int64),
        detuning=cat("detuning").astype(float),
        klass=cat("klass").astype(np.int8),
        pulses=cfg.pulses,
        summary=summary,
    )


def coincidence_count(stream: EventStream, channels=CHANNELS) -> int:
    """Number of pulses with a click on every listed channel."""
    return int(stream.coincident_pulses(channels).size)


def coincidence_probability(stream: EventStream,
                            channels=CHANNELS) -> tuple[float, float]:
    """Per-pulse coincidence probability with its binomial error."""
    n = coincidence_count(stream, channels)
    total = stream.pulses
    p = n / total
    return p, float(np.sqrt(max(p * (1.0 - p), 1.0 / total) / total))


def pulse_classes(stream: EventStream, pulses: np.ndarray) -> np.ndarray:
    """Emission-class code of each listed pulse (events are pulse-sorted)."""
    idx = np.searchsorted(stream.pulse, pulses, side="left")
    return stream.klass[idx]


def herald_pixel_map(stream: EventStream, cfg: ExperimentConfig,
                     channels=("c", "d"),
                     classes=None) -> CoincidenceHistogram:
    """2-d pixel histogram of coincident first clicks on two channels."""
    if len(channels) != 2:
        raise ValueError("pixel map needs exactly two channels")
    for ch in channels:
        if cfg.channel_tofs(ch) is None:
            raise ValueError(f"channel {ch!r} has no spectrometer model")
    if classes is not None:
        stream = stream.select_classes(classes)
    pulses = stream.coincident_pulses(channels)
    from .instrument import PixelMap

    axes = []
    pix = []
    for ch in channels:
        tofs = cfg.channel_tofs(ch)
        tags = stream.first_values(pulses, ch, "tag")
        lo, hi = PixelMap(tofs).pixel_range()
        axes.append(np.arange(lo, hi + 1))
        pix.append(np.clip(pixelize(tags, tofs), lo, hi) - lo)
    counts = np.zeros((axes[0].size, axes[1].size))
    np.add.at(counts, (pix[0], pix[1]), 1.0)
    meta = {
        "channels": tuple(channels),
        "pixel_nm": tuple(cfg.channel_tofs(ch).spectral_resolution
                          for ch in channels),
        "center_wavelength": tuple(cfg.channel_tofs(ch).center_wavelength
                                   for ch in channels),
    }
    return CoincidenceHistogram(
        axes=tuple(axes), counts=counts, total_pulses=stream.pulses, meta=meta
    )


SCAN_AXES = ("tau_s", "tau_i", "pump_phase")


def scan(cfg: ExperimentConfig, values, axis: str = "tau_s",
         channels=CHANNELS, threads: int = 1):
    """Coincidence probability vs a swept setting, with binomial errors.

    Each point runs a fresh stream on its own substream family (salted by
    the point index), so scans are reproducible point by point.  Counts
    and per-class fourfold tallies ride along in meta for background
    subtraction and its ground-truth check.
    """
    from .observables import FringeTrace

    if axis not in SCAN_AXES:
        raise ValueError(f"axis must be one of {SCAN_AXES}")
    values = np.atleast_1d(np.asarray(values, dtype=float))
    counts = np.zeros(values.size, dtype=np.int64)
    by_class = np.zeros((len(CLASS_NAMES), values.size), dtype=np.int64)
    for i, v in enumerate(values):
        cfg_i = replace(cfg, **{axis: float(v)})
        stream = sample_events(cfg_i, threads=threads, salt=i)
        pulses = stream.coincident_pulses(channels)
        counts[i] = pulses.size
        kl = pulse_classes(stream, pulses)
        for code in range(len(CLASS_NAMES)):
            by_class[code, i] = int(np.sum(kl == code))
    p = counts / cfg.pulses
    err = np.sqrt(np.maximum(p * (1.0 - p), 1.0 / cfg.pulses) / cfg.pulses)
    return FringeTrace(
        delays=values, values=p, errors=err,
        meta={
            "axis": axis,
            "channels": tuple(channels),
            "pulses": cfg.pulses,
            "counts": counts,
            "class_counts": {
                name: by_class[i].copy() for i, name in enumerate(CLASS_NAMES)
            },
        },
    )


def _scaled_subtraction(total_counts, total_norm, parts):
    est = np.asarray(total_counts, dtype=float).copy()
    var = np.asarray(total_counts, dtype=float).copy()
    for counts, norm in parts:
        scale = total_norm / norm
        est = est - scale * np.asarray(counts, dtype=float)
        var = var + scale**2 * np.asarray(counts, dtype=float)
    return est, var


def subtract_scan(total, bg_1, bg_2):
    """Remove measured single-source backgrounds from a scanned trace.

    Background runs may use different pulse counts; they are rescaled to
    the total run and the Poisson errors propagate in quadrature.  The
    result estimates the swapped-class trace alone.
    """
    from .observables import FringeTrace

    if not np.array_equal(total.delays, bg_1.delays) or not np.array_equal(
        total.delays, bg_2.delays
    ):
        raise ValueError("scans cover different settings")
    est, var = _scaled_subtraction(
        total.meta["counts"], total.meta["pulses"],
        [(bg_1.meta["counts"], bg_1.meta["pulses"]),
         (bg_2.meta["counts"], bg_2.meta["pulses"])],
    )
    pulses = total.meta["pulses"]
    return FringeTrace(
        delays=total.delays.copy(),
        values=np.clip(est / pulses, 0.0, 1.0),
        errors=np.sqrt(var) / pulses,
        meta={
            "axis": total.meta.get("axis"),
            "channels": total.meta.get("channels"),
            "pulses": pulses,
            "counts": est,
            "subtracted": True,
        },
    )


def subtract_map(total: CoincidenceHistogram, bg_1: CoincidenceHistogram,
                 bg_2: CoincidenceHistogram) -> CoincidenceHistogram:
    """Pixel-map version of the background subtraction."""
    for bg in (bg_1, bg_2):
        if bg.counts.shape != total.counts.shape:
            raise ValueError("histograms cover different pixel ranges")
    est, var = _scaled_subtraction(
        total.counts, total.total_pulses,
        [(bg_1.counts, bg_1.total_pulses), (bg_2.counts, bg_2.total_pulses)],
    )
    meta = dict(total.meta)
    meta["subtracted"] = True
    meta["variance"] = var
    return CoincidenceHistogram(
        axes=total.axes, counts=est, total_pulses=total.total_pulses, meta=meta
    )
