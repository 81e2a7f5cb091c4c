"""Fringe fitting, map symmetrization, and orthogonal-mode selection.

Fits work on `FringeTrace` objects against the closed-form shapes of the
two-photon interference signals: a fringe under a Gaussian envelope for
far-separated herald bins (optionally dephased by an idler delay), the
peak-in-dip shape for merged bins, and a bare cosine for pump-phase
scans.  Count data gets Poisson weights unless the trace carries its own
error bars.

Mode selection builds an overlap matrix over heralded intensity maps and
finds subsets whose pairwise overlaps all sit below a threshold, with an
exhaustive maximal-clique oracle for small inputs.
"""

from dataclasses import dataclass, field

import networkx as nx
import numpy as np
from scipy.optimize import curve_fit
from scipy.signal import lombscargle

from .observables import FringeTrace

FIT_MODELS = ("far-bin", "delayed", "degenerate", "cosine")

# restart grids for the bounded multi-start fit
_PHASE_STARTS = (0.0, np.pi / 2, np.pi, -np.pi / 2)
_FREQ_FACTORS = (1.0, 0.5, 2.0)

# exhaustive clique search is exponential; the oracle is scoped to small sets
MAX_EXHAUSTIVE_MODES = 25


def _shape_far_bin(x, baseline, vis, width, freq):
    return baseline * (1.0 + vis * np.exp(-((x / width) ** 2)) * np.cos(freq * x))


def _shape_delayed(x, baseline, vis, width, freq, phase):
    env = np.exp(-((x / width) ** 2))
    return baseline * (1.0 + vis * env * np.cos(freq * x - phase))


def _shape_cosine(x, baseline, vis, freq, phase):
    return baseline * (1.0 + vis * np.cos(freq * x - phase))


def _shape_degenerate(x, baseline, vis, width, center):
    u = (x - center) / width
    return baseline * (1.0 + vis * (1.0 - 2.0 * u**2) * np.exp(-((x / width) ** 2)))


_SHAPES = {
    "far-bin": (_shape_far_bin, ("baseline", "visibility", "width", "frequency")),
    "delayed": (_shape_delayed,
                ("baseline", "visibility", "width", "frequency", "phase")),
    "cosine": (_shape_cosine, ("baseline", "visibility", "frequency", "phase")),
    "degenerate": (_shape_degenerate,
                   ("baseline", "visibility", "width", "center")),
}


@dataclass(eq=False)
class FringeFit:
    """Result of a weighted least-squares fringe fit.

    `witness` is True when the fitted peak exceeds the 1/2 baseline by
    more than three propagated standard deviations, the entanglement
    condition for the verification signal.  Failed fits keep NaN
    parameters, `converged` False, and a residual report in `note`.
    """

    model: str
    baseline: float = np.nan
    visibility: float = np.nan
    frequency: float = 0.0
    phase: float = 0.0
    width: float = np.inf
    center: float = 0.0
    errors: dict = field(default_factory=dict)
    chi2: float = np.nan
    dof: int = 0
    witness: bool = False
    converged: bool = False
    note: str = ""
    cov: np.ndarray | None = field(default=None, repr=False)

    def predict(self, x) -> np.ndarray:
        """Evaluate the fitted model."""
        x = np.asarray(x, dtype=float)
        shape, names = _SHAPES[self.model]
        return shape(x, *[getattr(self, _FIELD_OF[n]) for n in names])

    def oscillation_amplitude(self) -> float:
        """Amplitude of the fitted fringe, zero when nothing oscillates.

        A cosine term that never completes a half period inside the
        envelope is a baseline deformation, not a fringe, so the
        amplitude counts only when frequency * width >= pi.  Uncorrelated
        sources fit to such a sub-period cosine and report zero here.
        """
        if not np.isfinite(self.baseline * self.visibility):
            return np.nan
        if self.frequency <= 0 or self.frequency * self.width < np.pi:
            return 0.0
        return self.baseline * self.visibility

    def parameters(self) -> dict:
        _, names = _SHAPES[self.model]
        return {n: getattr(self, _FIELD_OF[n]) for n in names}


# parameter-name -> dataclass-field map (identity here, kept for clarity)
_FIELD_OF = {n: n for n in
             ("baseline", "visibility", "width", "frequency", "phase", "center")}


def _weights(trace: FringeTrace):
    """Fit sigmas: supplied errors when present, else Poisson-like sqrt(y).

    Zeros are floored so fringe minima cannot get infinite weight; with
    the Poisson fallback the overall scale is left to the fit
    (absolute_sigma False), which keeps fits scale-consistent.
    """
    y = trace.values
    if trace.errors is not None and np.any(trace.errors > 0):
        e = np.asarray(trace.errors, dtype=float)
        floor = e[e > 0].min()
        return np.where(e > 0, e, floor), True
    top = y.max() if y.size and y.max() > 0 else 1.0
    return np.sqrt(np.clip(y, 1e-3 * top, None)), False


def _frequency_guess(x, y) -> float:
    """Dominant angular frequency via a Lomb-Scargle scan."""
    span = x.max() - x.min()
    dx = np.diff(np.sort(x)).min()
    if span <= 0 or dx <= 0:
        return 0.0
    freqs = np.linspace(0.5 * 2 * np.pi / span, np.pi / dx, 512)
    power = lombscargle(x, y - y.mean(), freqs)
    return float(freqs[np.argmax(power)])


def _starts(model, x, y):
    """Initial parameter vectors for the restart sweep."""
    span = max(x.max() - x.min(), 1e-12)
    b0 = float(np.median(y))
    if b0 <= 0:
        b0 = max(float(np.mean(y)), 1e-6)
    v0 = float(np.clip(np.ptp(y) / (2 * b0), 0.05, 1.4))
    w0s = (span / 3, span / 8)
    f0 = _frequency_guess(x, y)
    f0s = sorted({max(f, 2 * np.pi / (4 * span)) for f in
                  (f0 * fac for fac in _FREQ_FACTORS)})
    out = []
    if model == "far-bin":
        out = [(b0, v0, w, f) for w in w0s for f in f0s]
    elif model == "delayed":
        out = [(b0, v0, w, f, ph)
               for w in w0s for f in f0s for ph in _PHASE_STARTS]
    elif model == "cosine":
        out = [(b0, v0, f, ph) for f in f0s for ph in _PHASE_STARTS]
    elif model == "degenerate":
        c0s = (0.0, float(x[np.argmax(y)]))
        out = [(b0, v0, w, c) for w in w0s for c in c0s]
    return out


def _bounds(model, x):
    span = max(x.max() - x.min(), 1e-12)
    dx = np.diff(np.sort(x)).min()
    fmax = np.pi / max(dx, 1e-12)  # aliasing limit
    lo_hi = {
        "baseline": (1e-12, 1.0),
        "visibility": (0.0, 1.5),
        "width": (1e-3 * span, 1e3 * span),
        "frequency": (0.0, fmax),
        "phase": (-np.pi, np.pi),
        "center": (float(x.min()), float(x.max())),
    }
    _, names = _SHAPES[model]
    lo = [lo_hi[n][0] for n in names]
    hi = [lo_hi[n][1] for n in names]
    return lo, hi


def _propagate(func, popt, cov) -> float:
    """1-sigma uncertainty of scalar func(params) by linear propagation."""
    if cov is None or not np.all(np.isfinite(cov)):
        return np.inf
    grad = np.zeros(len(popt))
    for i, p in enumerate(popt):
        h = max(1e-7 * abs(p), 1e-9)
        up, dn = popt.copy(), popt.copy()
        up[i] += h
        dn[i] -= h
        grad[i] = (func(up) - func(dn)) / (2 * h)
    var = grad @ cov @ grad
    return float(np.sqrt(var)) if var >= 0 else np.inf


def fit_fringes(trace: FringeTrace, model: str = "delayed") -> FringeFit:
    """Weighted least-squares fit of a fringe trace to a closed-form shape.

    Needs roughly eight or more samples per fringe period for the
    frequency to be identifiable.  Runs a bounded grid of restarts and
    keeps the lowest chi^2; a fit whose visibility lands significantly
    above one (beyond three sigma) is demoted to a flagged failure
    rather than reported as physical.
    """
    if model not in _SHAPES:
        raise ValueError(f"unknown fit model {model!r}")
    x = trace.delays
    y = trace.values
    if x.size < 5:
        raise ValueError("too few points to fit")
    shape, names = _SHAPES[model]
    sigma, absolute = _weights(trace)
    lo, hi = _bounds(model, x)
    best = None
    for p0 in _starts(model, x, y):
        p0 = np.clip(p0, lo, hi)
        try:
            popt, pcov = curve_fit(shape, x, y, p0=p0, sigma=sigma,
                                   absolute_sigma=absolute, bounds=(lo, hi),
                                   maxfev=20000)
        except (RuntimeError, ValueError):
            continue
        chi2 = float(np.sum(((y - shape(x, *popt)) / sigma) ** 2))
        if best is None or chi2 < best[0]:
            best = (chi2, popt, pcov)
    if best is None:
        rms = float(np.sqrt(np.mean((y - np.median(y)) ** 2)))
        return FringeFit(model=model, converged=False, dof=x.size - len(names),
                         note=f"no convergence after restarts; "
                              f"residual rms about constant = {rms:.3e}")
    chi2, popt, pcov = best
    fields = dict(zip(names, popt))
    if "phase" in fields:  # canonical branch (-pi, pi]
        fields["phase"] = float(np.arctan2(np.sin(fields["phase"]),
                                           np.cos(fields["phase"])))
    errors = {n: float(np.sqrt(pcov[i, i])) if np.isfinite(pcov[i, i]) else np.inf
              for i, n in enumerate(names)}
    fit = FringeFit(model=model, errors=errors, chi2=chi2,
                    dof=x.size - len(names), converged=True, cov=pcov,
                    **{_FIELD_OF[n]: float(v) for n, v in fields.items()})
    vis_err = errors.get("visibility", np.inf)
    if fit.visibility > 1.0 + 3 * vis_err + 1e-6:
        fit.converged = False
        fit.note = (f"visibility {fit.visibility:.4f} above 1 beyond "
                    f"3 sigma ({vis_err:.2e}); rejected as unphysical")
        return fit
    dense = np.linspace(x.min(), x.max(), 2001)
    peak_ix = int(np.argmax(shape(dense, *popt)))
    peak = float(shape(dense[peak_ix], *popt))
    peak_err = _propagate(lambda p: shape(dense[peak_ix], *p), popt, pcov)
    fit.witness = bool(peak - 0.5 > 3 * peak_err)
    return fit


def visibility(trace: FringeTrace, model: str | None = None):
    """Fringe contrast (max-min)/(max+min) of the fitted model.

    Returns (value, 1-sigma error).  The model defaults to the bare
    cosine for pump-phase scans and the dephased envelope shape
    otherwise.  Raises on traces the fitter cannot represent.
    """
    if model is None:
        model = "cosine" if trace.meta.get("axis") == "pump_phase" else "delayed"
    fit = fit_fringes(trace, model)
    if not fit.converged:
        raise ValueError(f"unfittable trace: {fit.note}")
    shape, names = _SHAPES[model]
    popt = np.array([getattr(fit, _FIELD_OF[n]) for n in names])
    dense = np.linspace(trace.delays.min(), trace.delays.max(), 2001)

    def _contrast(params):
        vals = shape(dense, *params)
        top, bot = vals.max(), vals.min()
        return (top - bot) / (top + bot) if top + bot > 0 else 0.0

    return _contrast(popt), _propagate(_contrast, popt, fit.cov)


# ----------------------------------------------------------------------
# heralded-map symmetrization and orthogonal mode selection


def symmetrize_jsi(maps: dict) -> dict:
    """Average the (j,k) and (k,j) heralded intensity maps pairwise.

    `maps` takes (j, k) keys to 2-d arrays on a common calibrated axis.
    Returns one unit-sum map per unordered pair, keyed by the sorted
    pair.  The model maps are exactly symmetric under the swap, so on
    them this is a no-op up to normalization.
    """
    if not maps:
        raise ValueError("no maps given")
    shapes = {np.asarray(m).shape for m in maps.values()}
    if len(shapes) != 1:
        raise ValueError(f"maps disagree on axes: {sorted(shapes)}")
    if shapes.pop()[0] == 0:
        raise ValueError("empty maps")
    out = {}
    for j, k in sorted(set(tuple(sorted(key)) for key in maps)):
        orders = [(j, k)] if j == k else [(j, k), (k, j)]
        present = [np.asarray(maps[o], dtype=float) for o in orders if o in maps]
        avg = sum(present) / len(present)
        total = avg.sum()
        if total <= 0:
            raise ValueError(f"map for pair ({j}, {k}) has non-positive sum")
        out[(j, k)] = avg / total
    return out


@dataclass(eq=False)
class OverlapMatrix:
    """Pairwise overlaps of heralded intensity maps.

    With the default cosine normalization the diagonal is exactly 1 and
    entries live in [0, 1]; the unit-sum convention (each map normalized
    to unit total before the plain dot product) is exposed for
    comparison but keeps a scale on the diagonal.
    """

    labels: tuple
    matrix: np.ndarray
    threshold: float
    normalization: str = "cosine"

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] != len(self.labels):
            raise ValueError("overlap matrix shape does not match labels")
        if not np.allclose(m, m.T, atol=1e-12):
            raise ValueError("overlap matrix must be symmetric")
        if self.normalization == "cosine":
            if not np.allclose(np.diag(m), 1.0, atol=1e-9):
                raise ValueError("cosine overlaps need a unit diagonal")
            if m.min() < -1e-12 or m.max() > 1 + 1e-9:
                raise ValueError("cosine overlaps must lie in [0, 1]")
        if not 0 < self.threshold <= 1:
            raise ValueError("threshold must be in (0, 1]")
        self.matrix = m

    def compatible(self, a: int, b: int) -> bool:
        """True when rows a and b overlap strictly below the threshold."""
        return bool(self.matrix[a, b] < self.threshold)


def _mode_list(modes):
    """Normalize input to (labels, flattened unit arrays)."""
    if isinstance(modes, dict):
        labels = sorted(modes)
        arrays = [np.asarray(modes[k], dtype=float) for k in labels]
    else:
        arrays = [np.asarray(m, dtype=float) for m in modes]
        labels = list(range(len(arrays)))
    if not arrays:
        raise ValueError("no modes given")
    shapes = {a.shape for a in arrays}
    if len(shapes) != 1:
        raise ValueError(f"modes disagree on axes: {sorted(shapes)}")
    return tuple(labels), np.array([a.ravel() for a in arrays])


def overlap_matrix(modes, threshold: float = 0.15,
                   normalization: str = "cosine") -> OverlapMatrix:
    """Build the overlap matrix O_nm over a set of intensity maps."""
    labels, vecs = _mode_list(modes)
    if np.any(vecs < -1e-12):
        raise ValueError("intensity maps must be non-negative")
    if normalization == "cosine":
        norms = np.linalg.norm(vecs, axis=1)
        if np.any(norms == 0):
            raise ValueError("zero map cannot be normalized")
        m = (vecs @ vecs.T) / np.outer(norms, norms)
        m = np.clip((m + m.T) / 2, 0.0, 1.0)
        np.fill_diagonal(m, 1.0)
    elif normalization == "unit_sum":
        sums = vecs.sum(axis=1)
        if np.any(sums <= 0):
            raise ValueError("zero map cannot be normalized")
        w = vecs / sums[:, None]
        m = w @ w.T
        m = (m + m.T) / 2
    else:
        raise ValueError(f"unknown normalization {normalization!r}")
    return OverlapMatrix(labels=labels, matrix=m, threshold=threshold,
                         normalization=normalization)


def _as_matrix(modes, threshold, normalization) -> OverlapMatrix:
    if isinstance(modes, OverlapMatrix):
        if threshold is not None and threshold != modes.threshold:
            return OverlapMatrix(modes.labels, modes.matrix, threshold,
                                 modes.normalization)
        return modes
    return overlap_matrix(modes, threshold if threshold is not None else 0.15,
                          normalization)


def select_orthogonal(modes, threshold: float | None = None,
                      normalization: str = "cosine") -> list:
    """Greedy mutually-orthogonal mode subsets below an overlap threshold.

    Sweeps are seeded at every mode and grown by adding, among the still
    compatible candidates, the one with the lowest maximum overlap to
    the subset so far; ties break toward the lower label.  Every
    returned subset is maximal (no mode can be added), subsets are
    deduplicated, and the result is ordered largest first, then by
    label, so the output is independent of input ordering.
    """
    om = _as_matrix(modes, threshold, normalization)
    mat, labels = om.matrix, om.labels
    n = len(labels)
    order = sorted(range(n), key=lambda i: labels[i])
    found = set()
    for seed in order:
        subset = [seed]
        while True:
            cands = [i for i in order if i not in subset
                     and all(om.compatible(i, m) for m in subset)]
            if not cands:
                break
            subset.append(min(
                cands, key=lambda i: (max(mat[i, m] for m in subset), labels[i])))
        found.add(frozenset(subset))
    result = [tuple(sorted(labels[i] for i in s)) for s in found]
    result.sort(key=lambda s: (-len(s), s))
    return result


def exhaustive_orthogonal(modes, threshold: float | None = None,
                          normalization: str = "cosine") -> list:
    """All maximal mutually-orthogonal subsets, by maximal-clique search.

    Exact oracle counterpart of `select_orthogonal`; refuses inputs above
    MAX_EXHAUSTIVE_MODES since the enumeration is exponential.
    """
    om = _as_matrix(modes, threshold, normalization)
    n = len(om.labels)
    if n > MAX_EXHAUSTIVE_MODES:
        raise ValueError(f"exhaustive search capped at {MAX_EXHAUSTIVE_MODES} modes")
    graph = nx.Graph()
    graph.add_nodes_from(range(n))
    graph.add_edges_from((a, b) for a in range(n) for b in range(a + 1, n)
                         if om.compatible(a, b))
    result = [tuple(sorted(om.labels[i] for i in clique))
              for clique in nx.find_cliques(graph)]
    result.sort(key=lambda s: (-len(s), s))
    return result
