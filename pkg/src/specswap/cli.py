"""Command-line entry point.

Each subcommand ties a configuration file to one computation and writes
tab-delimited data files plus a manifest recording the configuration
hash, the seed, and the digests of everything produced.  Outputs are
deterministic: rerunning with the same configuration and seed gives
byte-identical files regardless of `--threads`.

The default output directory is `.`, overridable with `--out` or the
SPECSWAP_OUTDIR environment variable.
"""

import argparse
import os
import sys
from pathlib import Path

import numpy as np

from . import analysis, distinguish, events, mixed, observables
from .config import ConfigError, RunConfig, default_config, load_config
from .grid import TWO_PI_C, FrequencyGrid
from .heralding import HeraldSetting, herald, pjk_map
from .instrument import PixelMap
from .io import write_manifest, write_matrix, write_table
from .jsa import GaussianJSA, reduced_density, schmidt_decompose

OUTDIR_ENV = "SPECSWAP_OUTDIR"


def _parse_range(text: str) -> np.ndarray:
    """'start:stop:count' -> linspace; a single number -> one value."""
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ConfigError(f"range {text!r} must be start:stop:count")
        try:
            start, stop, count = float(parts[0]), float(parts[1]), int(parts[2])
        except ValueError:
            raise ConfigError(f"malformed range {text!r}") from None
        if count < 2:
            raise ConfigError(f"range {text!r} needs at least 2 points")
        return np.linspace(start, stop, count)
    try:
        return np.array([float(text)])
    except ValueError:
        raise ConfigError(f"malformed delay {text!r}") from None


def _parse_bins(text) -> tuple:
    try:
        j, k = (float(v) for v in text.split(","))
    except (ValueError, AttributeError):
        raise ConfigError(f"--bins expects 'j,k', got {text!r}") from None
    return j, k


class _Sink:
    """Collects written files so failures can remove partial output."""

    def __init__(self, outdir: Path):
        self.outdir = outdir
        self.files: list = []

    def path(self, name: str) -> Path:
        p = self.outdir / name
        self.files.append(p)
        return p

    def discard(self):
        for p in self.files:
            try:
                os.unlink(p)
            except FileNotFoundError:
                pass


def _trace_header(cfg: RunConfig, tr, extra=None) -> dict:
    head = {key: val for key, val in tr.meta.items()
            if np.isscalar(val) or isinstance(val, (bool, str))}
    head.update(extra or {})
    return head


def _write_trace(sink, name, tr, header) -> None:
    cols = [("delay", tr.delays), ("probability", tr.values)]
    if tr.errors is not None:
        cols.append(("error", tr.errors))
    write_table(sink.path(name), cols, header)


# ----------------------------------------------------------------------
# subcommands


def cmd_jsa(args, cfg, sink):
    """Joint spectral intensity and its marginals."""
    jsa = cfg.jsa()
    gs = cfg.grid_for(jsa, "signal", args.grid)
    gi = cfg.grid_for(jsa, "idler", args.grid)
    amp = jsa.sample(gs, gi)
    write_matrix(sink.path("jsi.txt"), np.abs(amp) ** 2,
                 ("signal_detuning", gs.detunings),
                 ("idler_detuning", gi.detunings),
                 {"model": cfg["jsa_model"], "center": jsa.center})
    rs = reduced_density(jsa, "signal", gs)
    ri = reduced_density(jsa, "idler", gi)
    write_table(sink.path("marginal_signal.txt"),
                [("detuning", gs.detunings),
                 ("density", np.real(np.diag(rs.values)))],
                {"axis": "signal"})
    write_table(sink.path("marginal_idler.txt"),
                [("detuning", gi.detunings),
                 ("density", np.real(np.diag(ri.values)))],
                {"axis": "idler"})


def cmd_schmidt(args, cfg, sink):
    """Schmidt decomposition; prints K."""
    jsa = cfg.jsa()
    gs = cfg.grid_for(jsa, "signal", args.grid)
    gi = cfg.grid_for(jsa, "idler", args.grid)
    dec = schmidt_decompose(jsa, gs, gi)
    head = {"schmidt_number": dec.number, "modes": len(dec.coefficients)}
    if isinstance(jsa, GaussianJSA):
        head["schmidt_number_closed"] = jsa.schmidt_number
    write_table(sink.path("schmidt.txt"),
                [("mode", np.arange(len(dec.coefficients))),
                 ("coefficient", dec.coefficients)], head)
    print(f"K = {dec.number:.6f}")


def cmd_pjk_map(args, cfg, sink):
    """Herald coincidence probability over idler bins."""
    jsa = cfg.jsa()
    grid = cfg.grid_for(jsa, "idler", args.grid)
    g, pmap = pjk_map(jsa, cfg["tau_i"], grid)
    write_matrix(sink.path("pjk.txt"), pmap / pmap.sum(),
                 ("herald_j", g.detunings), ("herald_k", g.detunings),
                 {"tau_i": cfg["tau_i"], "normalization": "unit_sum"})


def cmd_herald_jsi(args, cfg, sink):
    """Heralded signal JSI for one herald-bin pair."""
    j, k = _parse_bins(args.bins)
    jsa = cfg.jsa()
    setting = HeraldSetting(cfg.bin_detuning(j), cfg.bin_detuning(k),
                            cfg["tau_i"])
    grid = cfg.grid_for(jsa, "signal", args.grid)
    state = herald(jsa, setting, grid)
    fmap = observables.heralded_jsi(state)
    write_matrix(sink.path("fjk.txt"), fmap,
                 ("signal_1", grid.detunings), ("signal_2", grid.detunings),
                 {"bin_j": j, "bin_k": k,
                  "herald_j": setting.herald_j, "herald_k": setting.herald_k,
                  "tau_i": cfg["tau_i"], "degenerate": state.degenerate})


def cmd_summed_jsi(args, cfg, sink):
    """Herald-averaged signal JSI, quadrature and closed form."""
    jsa = cfg.jsa()
    grid = cfg.grid_for(jsa, "signal", args.grid)
    g, fsum = observables.summed_jsi(jsa, cfg["tau_i"], grid,
                                     method="quadrature")
    write_matrix(sink.path("fsum.txt"), fsum,
                 ("signal_1", g.detunings), ("signal_2", g.detunings),
                 {"tau_i": cfg["tau_i"], "method": "quadrature"})
    if isinstance(jsa, GaussianJSA):
        _, closed = observables.summed_jsi(jsa, cfg["tau_i"], grid,
                                           method="closed")
        write_matrix(sink.path("fsum_closed.txt"), closed,
                     ("signal_1", g.detunings), ("signal_2", g.detunings),
                     {"tau_i": cfg["tau_i"], "method": "closed"})


def cmd_fringes(args, cfg, sink):
    """Verification fringe P_jk(tau_s) for one herald-bin pair."""
    j, k = _parse_bins(args.bins)
    jsa = cfg.jsa()
    setting = HeraldSetting(cfg.bin_detuning(j), cfg.bin_detuning(k),
                            cfg["tau_i"])
    taus = _parse_range(args.tau_s) if args.tau_s else np.linspace(-3, 3, 361)
    state = herald(jsa, setting, cfg.grid_for(jsa, "signal", args.grid))
    tr = observables.fringe_pjk(state, taus)
    head = _trace_header(cfg, tr, {"bin_j": j, "bin_k": k})
    if args.emit_fit:
        fit = analysis.fit_fringes(tr, "delayed")
        head.update({f"fit_{name}": val for name, val in fit.parameters().items()})
        head["fit_converged"] = fit.converged
        head["fit_chi2"] = fit.chi2
        cols = [("delay", tr.delays), ("probability", tr.values),
                ("fit", fit.predict(tr.delays))]
        write_table(sink.path("fringes.txt"), cols, head)
        return
    _write_trace(sink, "fringes.txt", tr, head)


def cmd_peak(args, cfg, sink):
    """Herald-integrated coincidence P(tau_s): the peak in the HOM dip."""
    jsa = cfg.jsa()
    taus = _parse_range(args.tau_s) if args.tau_s else np.linspace(-4, 4, 321)
    pk = observables.fourfold_landscape(jsa, taus, np.array([cfg["tau_i"]]))
    vals = pk.values[:, 0]
    head = {"tau_i": cfg["tau_i"], "method": "quadrature"}
    if isinstance(jsa, GaussianJSA):
        head["p_zero_closed"] = 0.5 * (1 - 1 / jsa.schmidt_number)
        head["p_far"] = 0.25
    write_table(sink.path("peak.txt"),
                [("tau_s", taus), ("probability", vals)], head)


def cmd_peak2d(args, cfg, sink):
    """Coincidence landscape over both delays."""
    jsa = cfg.jsa()
    ts = _parse_range(args.tau_s) if args.tau_s else np.linspace(-3, 3, 121)
    ti = _parse_range(args.tau_i) if args.tau_i else np.linspace(-3, 3, 121)
    pk = observables.fourfold_landscape(jsa, ts, ti)
    write_matrix(sink.path("peak2d.txt"), pk.values,
                 ("tau_s", ts), ("tau_i", ti), {"method": "quadrature"})


def cmd_waterfall(args, cfg, sink):
    """Fringe traces stacked over idler delays (long format)."""
    j, k = _parse_bins(args.bins)
    jsa = cfg.jsa()
    ts = _parse_range(args.tau_s) if args.tau_s else np.linspace(-3, 3, 241)
    tis = _parse_range(args.tau_i) if args.tau_i else np.linspace(-0.3, 0.3, 7)
    grid = cfg.grid_for(jsa, "signal", args.grid)
    rows_ti, rows_ts, rows_p = [], [], []
    for ti in tis:
        setting = HeraldSetting(cfg.bin_detuning(j), cfg.bin_detuning(k), ti)
        tr = observables.fringe_pjk(herald(jsa, setting, grid), ts)
        rows_ti.append(np.full_like(ts, ti))
        rows_ts.append(ts)
        rows_p.append(tr.values)
    write_table(sink.path("waterfall.txt"),
                [("tau_i", np.concatenate(rows_ti)),
                 ("tau_s", np.concatenate(rows_ts)),
                 ("probability", np.concatenate(rows_p))],
                {"bin_j": j, "bin_k": k})


def cmd_simulate(args, cfg, sink):
    """Monte Carlo run; writes time tags and a summary."""
    exp = cfg.experiment()
    stream = events.sample_events(exp, threads=args.threads)
    write_table(sink.path("tags.txt"),
                [("pulse", stream.pulse),
                 ("channel", np.array(events.CHANNELS)[stream.channel]),
                 ("class", np.array(events.CLASS_NAMES)[stream.klass]),
                 ("tag", stream.tag), ("detuning", stream.detuning)],
                {"pulses": stream.pulses, "seed": cfg["seed"],
                 "measurement": cfg["measurement"]})
    summary = dict(stream.summary["losses"])
    summary.update({f"pulses_{name}": count for name, count
                    in stream.summary["class_pulses"].items()})
    summary["fourfold"] = events.coincidence_count(stream, "cdxy")
    write_table(sink.path("summary.txt"),
                [("key", np.array(sorted(summary), dtype=object)),
                 ("value", np.array([summary[k] for k in sorted(summary)]))],
                {"pulses": stream.pulses})
    if cfg["measurement"] == "jsi" and cfg.tofs():
        hist = events.herald_pixel_map(stream, exp)
        write_matrix(sink.path("pixelmap.txt"), hist.counts,
                     ("pixel_c", hist.axes[0]), ("pixel_d", hist.axes[1]),
                     {"pixel_nm": hist.meta["pixel_nm"],
                      "channels": "".join(hist.meta["channels"])})


def cmd_subtract_background(args, cfg, sink):
    """Fourfold delay scan with single-source backgrounds removed."""
    taus = _parse_range(args.tau_s) if args.tau_s else np.linspace(-4, 4, 17)
    total = events.scan(cfg.experiment(), taus, "tau_s", threads=args.threads)
    bg1 = events.scan(cfg.experiment(eta_2=0.0), taus, "tau_s",
                      threads=args.threads)
    bg2 = events.scan(cfg.experiment(eta_1=0.0), taus, "tau_s",
                      threads=args.threads)
    sub = events.subtract_scan(total, bg1, bg2)
    write_table(sink.path("background.txt"),
                [("tau_s", taus), ("total", total.values),
                 ("background_1", bg1.values), ("background_2", bg2.values),
                 ("subtracted", sub.values), ("error", sub.errors)],
                {"pulses": cfg["pulses"], "seed": cfg["seed"]})


def cmd_purity(args, cfg, sink):
    """Heralded purity against the herald filter width."""
    jsa = cfg.jsa()
    if not isinstance(jsa, GaussianJSA):
        raise ConfigError("purity closed forms need the gaussian model")
    lam = cfg["center_wavelength_nm"]
    widths_nm = np.geomspace(0.02, 5.0, 16)
    to_rad = TWO_PI_C / lam**2
    gauss, rect = [], []
    for w in widths_nm:
        sigma = w * to_rad * mixed.FWHM_TO_SIGMA
        gauss.append(mixed.gaussian_filter_purity(jsa, sigma))
        band = mixed.SpectralFilter(0.0, w * to_rad, "rect")
        rect.append(mixed.band_purity_reduced(jsa, band))
    full = mixed.hom_purity_bound(jsa)
    write_table(sink.path("purity.txt"),
                [("filter_width_nm", widths_nm),
                 ("purity_gauss", np.array(gauss)),
                 ("purity_rect", np.array(rect))],
                {"schmidt_number": jsa.schmidt_number,
                 "full_band_bound": full,
                 "inverse_schmidt": 1.0 / jsa.schmidt_number})
    print(f"full-band purity bound = {full:.4f} "
          f"(1/K = {1.0 / jsa.schmidt_number:.4f})")


def cmd_distinguishability(args, cfg, sink):
    """Source-mismatch diagnostics: pump fringes and per-bin visibilities."""
    jsa = cfg.jsa()
    other = distinguish.translated(jsa, cfg["delta_s"], cfg["delta_i"])
    overlap = distinguish.source_overlap(jsa, other)
    phases = np.linspace(0.0, 2 * np.pi, 73)
    two = distinguish.pump_phase_fringes(jsa, other, phases,
                                         cfg["eta_1"], cfg["eta_2"])
    four = distinguish.fourfold_phase_fringes(jsa, other, phases,
                                              cfg["eta_1"], cfg["eta_2"])
    _write_trace(sink, "twofold.txt", two,
                 _trace_header(cfg, two, {"delta_s": cfg["delta_s"],
                                          "delta_i": cfg["delta_i"]}))
    _write_trace(sink, "fourfold.txt", four, _trace_header(cfg, four))
    bins = np.arange(-2, 3)
    vmap = np.zeros((bins.size, bins.size))
    for a, bj in enumerate(bins):
        for b, bk in enumerate(bins):
            vmap[a, b] = distinguish.herald_visibility(
                jsa, other, cfg.bin_detuning(bj), cfg.bin_detuning(bk))
    write_matrix(sink.path("vjk.txt"), vmap,
                 ("bin_j", bins), ("bin_k", bins),
                 {"overlap_mag": abs(overlap),
                  "overlap_sq": abs(overlap) ** 2,
                  "delta_s": cfg["delta_s"], "delta_i": cfg["delta_i"]})
    print(f"source overlap = {abs(overlap):.4f}, "
          f"twofold visibility = {two.meta['visibility']:.4f}")


def cmd_orthomodes(args, cfg, sink):
    """Heralded-mode overlap matrix and orthogonal subsets."""
    jsa = cfg.jsa()
    grid = cfg.grid_for(jsa, "signal", args.grid)
    half = args.bin_range
    maps = {}
    for j in range(-half, half + 1):
        for k in range(-half, half + 1):
            if j >= k:
                continue
            setting = HeraldSetting(cfg.bin_detuning(j), cfg.bin_detuning(k),
                                    cfg["tau_i"])
            state = herald(jsa, setting, grid)
            if not state.degenerate:
                maps[(j, k)] = observables.heralded_jsi(state)
    modes = analysis.symmetrize_jsi(maps)
    om = analysis.overlap_matrix(modes, args.threshold)
    subsets = analysis.select_orthogonal(om)
    labels = list(om.labels)
    idx = np.arange(len(labels))
    write_table(sink.path("modes.txt"),
                [("mode", idx),
                 ("bin_j", np.array([j for j, _ in labels])),
                 ("bin_k", np.array([k for _, k in labels]))],
                {"threshold": args.threshold})
    write_matrix(sink.path("overlaps.txt"), om.matrix,
                 ("mode", idx), ("mode", idx),
                 {"threshold": args.threshold,
                  "normalization": om.normalization})
    lines = []
    for rank, subset in enumerate(subsets):
        members = ";".join(f"{j},{k}" for j, k in subset)
        lines.append((rank, len(subset), members))
    write_table(sink.path("subsets.txt"),
                [("rank", np.array([l[0] for l in lines])),
                 ("size", np.array([l[1] for l in lines])),
                 ("members", np.array([l[2] for l in lines], dtype=object))],
                {"threshold": args.threshold, "count": len(subsets)})
    print(f"{len(subsets)} maximal subsets; largest has {len(subsets[0])} modes")


def cmd_calibration(args, cfg, sink):
    """Pixel-to-wavelength mapping of the configured spectrometers."""
    tofs = cfg.tofs()
    if not tofs:
        raise ConfigError("key 'tofs_channels': no spectrometers configured")
    channel, config = sorted(tofs.items())[0]
    pm = PixelMap(config)
    lo, hi = pm.pixel_range()
    pixels = np.arange(lo, hi + 1)
    write_table(sink.path("calibration.txt"),
                [("pixel", pixels),
                 ("wavelength_nm", pm.pixel_to_wavelength(pixels)),
                 ("detuning", pm.pixel_to_detuning(pixels))],
                {"channel": channel,
                 "pixel_nm": config.spectral_resolution,
                 "dispersion_ps_nm": config.dispersion,
                 "tdc_bin_ps": config.tdc_bin,
                 "center_wavelength_nm": config.center_wavelength})


COMMANDS = {
    "jsa": cmd_jsa,
    "schmidt": cmd_schmidt,
    "pjk-map": cmd_pjk_map,
    "herald-jsi": cmd_herald_jsi,
    "summed-jsi": cmd_summed_jsi,
    "fringes": cmd_fringes,
    "peak": cmd_peak,
    "peak2d": cmd_peak2d,
    "waterfall": cmd_waterfall,
    "simulate": cmd_simulate,
    "subtract-background": cmd_subtract_background,
    "purity": cmd_purity,
    "distinguishability": cmd_distinguishability,
    "orthomodes": cmd_orthomodes,
    "calibration": cmd_calibration,
}

_NEEDS_BINS = ("herald-jsi", "fringes", "waterfall")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="specswap",
        description="Spectrally-resolved entanglement-swapping toolkit")
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", help="key = value configuration file")
    parser.add_argument("--out", help=f"output directory (default $"
                                      f"{OUTDIR_ENV} or '.')")
    parser.add_argument("--seed", type=int, help="override the config seed")
    parser.add_argument("--threads", type=int, default=1,
                        help="worker cap; never changes results")
    parser.add_argument("--grid", type=int, help="override grid_points")
    parser.add_argument("--bins", help="herald bin pair 'j,k'")
    parser.add_argument("--tau-s", help="signal delay or start:stop:count (ps)")
    parser.add_argument("--tau-i", help="idler delay or start:stop:count (ps)")
    parser.add_argument("--emit-fit", action="store_true",
                        help="attach a fringe fit to the trace output")
    parser.add_argument("--threshold", type=float, default=0.15,
                        help="orthogonality threshold for orthomodes")
    parser.add_argument("--bin-range", type=int, default=2,
                        help="orthomodes herald bins span [-N, N]")
    return parser


def _join_negative_values(argv: list) -> list:
    """Glue values like '-4:4:81' onto their flag so argparse keeps them."""
    out, skip = [], False
    for i, tok in enumerate(argv):
        if skip:
            skip = False
            continue
        nxt = argv[i + 1] if i + 1 < len(argv) else None
        if (tok in ("--tau-s", "--tau-i", "--bins") and nxt
                and nxt.startswith("-") and (":" in nxt or "," in nxt)):
            out.append(f"{tok}={nxt}")
            skip = True
        else:
            out.append(tok)
    return out


def main(argv=None) -> int:
    if argv is None:
        argv = sys.argv[1:]
    args = build_parser().parse_args(_join_negative_values(list(argv)))
    try:
        cfg = load_config(args.config) if args.config else default_config()
        if args.seed is not None:
            cfg.values["seed"] = args.seed
        if args.threads < 1:
            raise ConfigError("--threads must be at least 1")
        if args.command in _NEEDS_BINS and not args.bins:
            raise ConfigError(f"{args.command} requires --bins j,k")
        # single-value delay overrides fold into the configuration
        if args.tau_i and ":" not in args.tau_i and args.command != "peak2d":
            cfg.values["tau_i"] = float(_parse_range(args.tau_i)[0])
        outdir = Path(args.out or os.environ.get(OUTDIR_ENV, "."))
        outdir.mkdir(parents=True, exist_ok=True)
        sink = _Sink(outdir)
        try:
            COMMANDS[args.command](args, cfg, sink)
            write_manifest(outdir, args.command, cfg.semantic_hash(),
                           cfg["seed"], sink.files)
        except Exception:
            sink.discard()
            raise
    except (ConfigError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
