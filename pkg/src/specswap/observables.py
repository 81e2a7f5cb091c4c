"""Interference observables of the heralded pure states.

Covers the quantities measured after the idler Bell-state measurement:

* F_jk -- the heralded joint spectral intensity of the two signals,
* F    -- the herald-averaged (summed) JSI,
* P_jk(tau_s) -- the signal beamsplitter coincidence probability versus
  signal delay, whose fringes witness the frequency-bin entanglement,
* P(tau_s, tau_i) -- the herald-averaged coincidence probability over both
  delays (a sharp peak on top of the two HOM dips).

Every quantity has a generic quadrature route valid for any amplitude
model, and a Gaussian closed form used for cross-validation.  Weighted
sums over herald bins use the exact algebraic identity

    p_jk F_jk = (1/4) |f(w1,Oj) f(w2,Ok) - e^{i theta} f(w2,Oj) f(w1,Ok)|^2,

in which the mode normalizations cancel, so the discrete herald sums are
evaluated without ever dividing by a vanishing C_jk.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .grid import FrequencyGrid, simpson_weights
from .heralding import HeraldSetting, HeraldedBellState, mode_overlap_closed
from .jsa import GaussianJSA, JSAModel, reduced_density


@dataclass(eq=False)
class FringeTrace:
    """Coincidence probability (or frequency) versus a delay.

    `errors` is populated by the Monte Carlo scans; analytic traces leave
    it None.  `meta` carries herald settings / model identifiers into the
    export headers.
    """

    delays: np.ndarray
    values: np.ndarray
    errors: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        d = np.asarray(self.delays, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if d.shape != v.shape or d.ndim != 1:
            raise ValueError("delays and values must be matching 1-d arrays")
        if np.any(v < -1e-9) or np.any(v > 1.0 + 1e-9):
            raise ValueError("probabilities outside [0, 1]")
        self.delays = d
        self.values = v
        if self.errors is not None:
            e = np.asarray(self.errors, dtype=float)
            if e.shape != d.shape:
                raise ValueError("errors shape mismatch")
            self.errors = e


@dataclass(eq=False)
class Peak2D:
    """Coincidence probability over the (signal delay, idler delay) plane."""

    tau_s: np.ndarray
    tau_i: np.ndarray
    values: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        ts = np.asarray(self.tau_s, dtype=float)
        ti = np.asarray(self.tau_i, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if v.shape != (ts.size, ti.size):
            raise ValueError("values shape does not match delay axes")
        if np.any(v < -1e-9) or np.any(v > 1.0 + 1e-9):
            raise ValueError("probabilities outside [0, 1]")
        self.tau_s, self.tau_i, self.values = ts, ti, v


# ----------------------------------------------------------------------
# heralded JSI


def heralded_jsi(state: HeraldedBellState) -> np.ndarray:
    """F_jk(w1, w2) = |A(w1, w2)|^2 on the mode grids (unit integral).

    Degenerate-flagged states give a zero map, the convention used when
    assembling maps over all herald bins.
    """
    amp = state.joint_amplitude()
    return np.abs(amp) ** 2


def heralded_jsi_far_bin(state: HeraldedBellState) -> np.ndarray:
    """Far-separated-bin approximation of F_jk: two mirror-image spots.

    (1/2)[|phi_j(w1)|^2 |phi_k(w2)|^2 + |phi_k(w1)|^2 |phi_j(w2)|^2],
    dropping the interference cross terms, valid when the heralded modes
    barely overlap.
    """
    pj = np.abs(state.mode_j.values) ** 2
    pk = np.abs(state.mode_k.values) ** 2
    return 0.5 * (np.outer(pj, pk) + np.outer(pk, pj))


def summed_jsi(jsa: JSAModel, tau_i: float = 0.0,
               grid: FrequencyGrid | None = None,
               herald_grid: FrequencyGrid | None = None,
               method: str = "auto") -> tuple[FrequencyGrid, np.ndarray]:
    """Herald-averaged signal JSI F(w1, w2) = sum over bins of p_jk F_jk.

    method "closed" (Gaussian only):
        F = (1/2)[rho_s(w1,w1) rho_s(w2,w2)
                  - |rho_s(w1,w2)|^2 e^{-sigma_i^2 tau_i^2}].
    method "quadrature": the discrete herald sum, which collapses to
        F = (1/2)[rho_d(w1) rho_d(w2) - |M(w1,w2)|^2],
        M(w1,w2) = sum_h w_h f(w2,O_h) f*(w1,O_h) e^{i O_h tau_i},
    with rho_d the same discrete idler trace; this equals the literal
    sum_jk w_j w_k p_jk F_jk to round-off.
    """
    g = grid or jsa.default_grid_s()
    if method == "auto":
        method = "closed" if isinstance(jsa, GaussianJSA) else "quadrature"
    if method == "closed":
        if not isinstance(jsa, GaussianJSA):
            raise ValueError("closed form requires a Gaussian model")
        x = g.detunings
        diag = jsa.rho_s(x, x)
        off = jsa.rho_s(x[:, None], x[None, :])
        damp = np.exp(-jsa.sigma_i**2 * tau_i**2)
        values = 0.5 * (np.outer(diag, diag) - np.abs(off) ** 2 * damp)
    elif method == "quadrature":
        hg = herald_grid or jsa.default_grid_i()
        f = jsa.sample(g, hg)  # (signal, herald)
        w = simpson_weights(hg.count, hg.spacing)
        phase = np.exp(1j * hg.detunings * tau_i)
        rho_d = np.sum(w * np.abs(f) ** 2, axis=1).real
        m = (f.conj() * (w * phase)) @ f.T  # M[w1, w2]
        values = 0.5 * (np.outer(rho_d, rho_d) - np.abs(m) ** 2)
    else:
        raise ValueError(f"unknown method {method!r}")
    return g, np.clip(values, 0.0, None)


# ----------------------------------------------------------------------
# delay fringes of a single heralded state


def _mode_transforms(state: HeraldedBellState, tau_s: np.ndarray):
    """Fourier ingredients of the exact P_jk formula.

    F_a(tau) = int |phi_a|^2 e^{i w tau} dw  (mode intensity transform)
    g_ab(tau) = int phi_a* phi_b e^{i w tau} dw  (mode cross transform)

    Carrier phases cancel in the combinations used, so detunings suffice.
    """
    g = state.mode_j.grid
    w = simpson_weights(g.count, g.spacing)
    phase = np.exp(1j * np.outer(g.detunings, tau_s))  # (grid, delays)
    pj, pk = state.mode_j.values, state.mode_k.values
    fj = (w * np.abs(pj) ** 2) @ phase
    fk = (w * np.abs(pk) ** 2) @ phase
    gjk = (w * np.conj(pj) * pk) @ phase
    gkj = (w * np.conj(pk) * pj) @ phase
    return fj, fk, gjk, gkj


def fringe_pjk(state: HeraldedBellState, tau_s: np.ndarray) -> FringeTrace:
    """Exact signal-coincidence probability P_jk(tau_s), all terms kept.

    P = 1/2 + Re[e^{i theta} F_j F_k*] / (2 C)
          - (|g_jk|^2 + |g_kj|^2) / (4 C).

    The g terms are the O(|<phi_j|phi_k>|^2) corrections; they matter only
    for nearby bins.  Degenerate-flagged states (unit mode overlap, zero
    phase) are a 0/0 limit of the formula above; the limit exists and is
    the plain HOM dip of the two identical modes, 1/2 - Re[F_j F_k*] / 2,
    which is what gets returned.
    """
    tau_s = np.asarray(tau_s, dtype=float)
    meta = {
        "herald_j": state.setting.herald_j,
        "herald_k": state.setting.herald_k,
        "tau_i": state.setting.tau_i,
        "model": "exact",
    }
    fj, fk, gjk, gkj = _mode_transforms(state, tau_s)
    if state.degenerate:
        vals = 0.5 - 0.5 * np.real(fj * np.conj(fk))
        meta["model"] = "exact-degenerate-limit"
        return FringeTrace(tau_s, np.clip(vals, 0.0, 1.0), meta=meta)
    c = state.c_norm
    vals = (
        0.5
        + np.real(np.exp(1j * state.theta) * fj * np.conj(fk)) / (2 * c)
        - (np.abs(gjk) ** 2 + np.abs(gkj) ** 2) / (4 * c)
    )
    return FringeTrace(tau_s, np.clip(vals, 0.0, 1.0), meta=meta)


def fringe_pjk_closed(jsa: GaussianJSA, setting: HeraldSetting,
                      tau_s: np.ndarray) -> FringeTrace:
    """Gaussian closed form of P_jk(tau_s).

    P = 1/2 + e^{-sigma_s^2 tau^2} [cos((w_j - w_k) tau + theta) - v^2] / (2 C),
    v = <phi_j|phi_k>, C = 1 - v^2 cos(theta).

    Degenerate settings (C = 0) return the regularized limit, matching
    the quadrature path in `fringe_pjk`.
    """
    tau_s = np.asarray(tau_s, dtype=float)
    v = mode_overlap_closed(jsa, setting.herald_j, setting.herald_k)
    theta = setting.theta
    c = 1.0 - v**2 * np.cos(theta)
    meta = {
        "herald_j": setting.herald_j,
        "herald_k": setting.herald_k,
        "tau_i": setting.tau_i,
        "model": "gaussian-closed",
    }
    dw = jsa.mode_slope * (setting.herald_j - setting.herald_k)
    env = np.exp(-jsa.sigma_s**2 * tau_s**2)
    if c < 1e-12:
        vals = 0.5 - 0.5 * env * np.cos(dw * tau_s)
        meta["model"] = "gaussian-closed-degenerate-limit"
        return FringeTrace(tau_s, np.clip(vals, 0.0, 1.0), meta=meta)
    vals = 0.5 + env * (np.cos(dw * tau_s + theta) - v**2) / (2 * c)
    return FringeTrace(tau_s, np.clip(vals, 0.0, 1.0), meta=meta)


def fringe_pjk_far_bin(jsa: GaussianJSA, setting: HeraldSetting,
                       tau_s: np.ndarray) -> FringeTrace:
    """Far-bin approximation: unit-visibility fringes under the envelope.

    P = 1/2 + (1/2) e^{-sigma_s^2 tau^2} cos[(w_j - w_k)(tau - tau_i')],
    tau_i' = tau_i / (2 alpha sigma_s^2); the phase offset shows how the
    idler delay shears the fringes away from the envelope center.
    """
    tau_s = np.asarray(tau_s, dtype=float)
    dw = jsa.mode_slope * (setting.herald_j - setting.herald_k)
    env = np.exp(-jsa.sigma_s**2 * tau_s**2)
    vals = 0.5 + 0.5 * env * np.cos(dw * tau_s + setting.theta)
    meta = {
        "herald_j": setting.herald_j,
        "herald_k": setting.herald_k,
        "tau_i": setting.tau_i,
        "model": "far-bin",
    }
    return FringeTrace(tau_s, np.clip(vals, 0.0, 1.0), meta=meta)


def idler_delay_equivalent(jsa: GaussianJSA, tau_i: float) -> float:
    """tau_i' = tau_i / (2 alpha sigma_s^2), the fringe shift per idler delay."""
    if jsa.alpha == 0:
        raise ValueError("tau_i' undefined for an uncorrelated amplitude (alpha = 0)")
    return tau_i / (2 * jsa.alpha * jsa.sigma_s**2)


def fringe_degenerate(jsa: GaussianJSA, tau_s: np.ndarray, tau_i: float = 0.0,
                      variant: str = "exact") -> FringeTrace:
    """Limit of P_jk as the two herald bins merge: a peak inside a HOM dip.

    exact:
        P = 1/2 - (1/2) [2 sigma_s^2 (tau - tau_i')^2 - 1]
              e^{-sigma_s^2 tau^2} / (1 + 2 sigma_s^2 tau_i'^2)
    as_printed:
        same numerator over (1 + 4 (sigma_s tau_i')^2), keeping a published
        variant whose denominator only makes sense with tau_i' measured in
        units of 1/sigma_s; retained for comparison, not for cross-checks.

    Both coincide at tau_i = 0, where the minimum is 1/2 - e^{-3/2} at
    sigma_s tau = sqrt(3/2) and the zero-delay value is 1.
    """
    tau_s = np.asarray(tau_s, dtype=float)
    tip = idler_delay_equivalent(jsa, tau_i) if tau_i != 0.0 else 0.0
    s2 = jsa.sigma_s**2
    if variant == "exact":
        denom = 1.0 + 2.0 * s2 * tip**2
    elif variant == "as_printed":
        denom = 1.0 + 4.0 * s2 * tip**2
    else:
        raise ValueError(f"unknown variant {variant!r}")
    num = 2.0 * s2 * (tau_s - tip) ** 2 - 1.0
    vals = 0.5 - 0.5 * num * np.exp(-s2 * tau_s**2) / denom
    meta = {"tau_i": tau_i, "model": f"degenerate-{variant}"}
    return FringeTrace(tau_s, np.clip(vals, 0.0, 1.0), meta=meta)


# ----------------------------------------------------------------------
# herald-averaged two-delay peak


def fourfold_landscape_closed(jsa: GaussianJSA, tau_s: np.ndarray,
                              tau_i: np.ndarray) -> Peak2D:
    """Closed-form P(tau_s, tau_i) for the Gaussian model.

    P = (1/4) [1 + m^2 - (e^{-sigma_i^2 tau_i^2} + e^{-sigma_s^2 tau_s^2})/K],
    m^2 = exp[-K^2 (sigma_s^2 tau_s^2 + sigma_i^2 tau_i^2)
              + 4 alpha sigma_s^2 sigma_i^2 K^2 tau_s tau_i],
    the squared 2D Fourier transform of the joint intensity.  The peak term
    m^2 rides on a ridge tau_s = 2 alpha sigma_i^2 tau_i.
    """
    ts = np.asarray(tau_s, dtype=float)[:, None]
    ti = np.asarray(tau_i, dtype=float)[None, :]
    k = jsa.schmidt_number
    m2 = np.exp(
        -(k**2) * (jsa.sigma_s**2 * ts**2 + jsa.sigma_i**2 * ti**2)
        + 4 * jsa.alpha * jsa.sigma_s**2 * jsa.sigma_i**2 * k**2 * ts * ti
    )
    vals = 0.25 * (
        1.0
        + m2
        - (np.exp(-jsa.sigma_i**2 * ti**2) + np.exp(-jsa.sigma_s**2 * ts**2)) / k
    )
    return Peak2D(np.ravel(tau_s), np.ravel(tau_i), vals,
                  meta={"model": "gaussian-closed"})


def fourfold_landscape(jsa: JSAModel, tau_s: np.ndarray, tau_i: np.ndarray,
                       grid_s: FrequencyGrid | None = None,
                       grid_i: FrequencyGrid | None = None) -> Peak2D:
    """Quadrature evaluation of P(tau_s, tau_i) for any amplitude model.

    Four terms: a constant 1, the squared 2D Fourier transform of |f|^2,
    and the signal/idler HOM overlap integrals
    int |rho(x,x')|^2 e^{i (x - x') tau} dx dx'.
    """
    ts = np.asarray(tau_s, dtype=float)
    ti = np.asarray(tau_i, dtype=float)
    gs = grid_s or jsa.default_grid_s()
    gi = grid_i or jsa.default_grid_i()
    f = jsa.sample(gs, gi)
    ws = simpson_weights(gs.count, gs.spacing)
    wi = simpson_weights(gi.count, gi.spacing)
    intens = (np.abs(f) ** 2) * np.outer(ws, wi)
    es = np.exp(1j * np.outer(gs.detunings, ts))  # (Gs, Ts)
    ei = np.exp(1j * np.outer(gi.detunings, ti))  # (Gi, Ti)
    # same-sign exponents: the x*tau_s and y*tau_i phases add, which is what
    # slants the peak ridge along tau_s = 2 alpha sigma_i^2 tau_i
    m = es.T @ intens @ ei
    term_peak = np.abs(m) ** 2

    def _hom_term(rho_vals, g, weights, taus):
        b = (np.abs(rho_vals) ** 2) * np.outer(weights, weights)
        e = np.exp(1j * np.outer(g.detunings, taus))
        return np.real(np.einsum("at,ab,bt->t", e.conj(), b, e))

    rho_s = reduced_density(jsa, "signal", gs, method="quadrature")
    rho_i = reduced_density(jsa, "idler", gi, method="quadrature")
    dip_s = _hom_term(rho_s.values, gs, ws, ts)  # over tau_s
    dip_i = _hom_term(rho_i.values, gi, wi, ti)  # over tau_i
    vals = 0.25 * (1.0 + term_peak - dip_i[None, :] - dip_s[:, None])
    return Peak2D(ts, ti, np.clip(vals, 0.0, 1.0), meta={"model": "quadrature"})


def fourfold_landscape_herald_sum(jsa: JSAModel, tau_s: np.ndarray,
                                  tau_i: float,
                                  grid_s: FrequencyGrid | None = None,
                                  herald_grid: FrequencyGrid | None = None) -> FringeTrace:
    """Discrete herald-bin sum  sum_jk w_j w_k p_jk P_jk(tau_s)  at one tau_i.

    Uses the division-free combination
        p_jk P_jk = (1/4) N_j N_k [C_jk + Re(e^{i theta} F_j F_k*)
                                   - (|g_jk|^2 + |g_kj|^2)/2],
    evaluated for all herald pairs at once; the independent check for the
    closed-form landscape.
    """
    ts = np.asarray(tau_s, dtype=float)
    gs = grid_s or jsa.default_grid_s()
    hg = herald_grid or jsa.default_grid_i()
    f = jsa.sample(gs, hg)  # (signal, herald)
    ws = simpson_weights(gs.count, gs.spacing)
    wh = simpson_weights(hg.count, hg.spacing)
    norms = np.sum(ws[:, None] * np.abs(f) ** 2, axis=0).real  # N_h
    phi = f / np.sqrt(norms)[None, :]
    # overlap matrix v_ab = <phi_a|phi_b> and phase matrix
    v = (phi.conj() * ws[:, None]).T @ phi
    om = hg.detunings
    theta = (om[:, None] - om[None, :]) * tau_i
    c = 1.0 - np.abs(v) ** 2 * np.cos(theta)
    weight = 0.25 * np.outer(norms, norms) * np.outer(wh, wh)
    out = np.empty_like(ts)
    intens = np.abs(phi) ** 2
    for idx, tau in enumerate(ts):
        e = ws * np.exp(1j * gs.detunings * tau)
        fh = e @ intens  # F_a(tau) for every herald bin
        gmat = (phi.conj() * e[:, None]).T @ phi  # g_ab(tau)
        cross = np.real(np.exp(1j * theta) * np.outer(fh, fh.conj()))
        bunch = 0.5 * (np.abs(gmat) ** 2 + np.abs(gmat.T) ** 2)
        out[idx] = np.sum(weight * (c + cross - bunch))
    return FringeTrace(ts, np.clip(out, 0.0, 1.0),
                       meta={"tau_i": tau_i, "model": "herald-sum"})
