"""Frequency-resolved idler measurement and the heralded signal states.

The two idlers interfere on a balanced beamsplitter and are detected in
narrow frequency bins (Omega_j, Omega_k) with a relative delay tau_i
between the arms.  A coincidence between the two output ports projects the
signal photons onto the two-mode entangled state

    |Psi_jk> = (|phi_j>|phi_k> - e^{i theta_jk} |phi_k>|phi_j>) / sqrt(2 C_jk),

where phi_j is the signal mode heralded by an idler at Omega_j,
theta_jk = (Omega_j - Omega_k) tau_i, and
C_jk = 1 - |<phi_j|phi_k>|^2 cos(theta_jk).

Herald frequencies are handled as detunings from the carrier throughout.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .grid import FrequencyGrid, simpson_weights
from .jsa import GaussianJSA, JSAModel, reduced_density

# a herald is rejected when the idler spectral density there is below this
# fraction of its peak: the conditional mode is numerically undefined
DENSITY_FLOOR = 1e-12

# C_jk below this is treated as an exactly degenerate (measure-zero) herald
DEGENERATE_TOL = 1e-12


@dataclass(frozen=True)
class HeraldSetting:
    """Idler detection bins (detunings, rad/ps) and relative delay (ps)."""

    herald_j: float
    herald_k: float
    tau_i: float = 0.0

    def __post_init__(self):
        for v in (self.herald_j, self.herald_k, self.tau_i):
            if not np.isfinite(v):
                raise ValueError("herald settings must be finite")

    @property
    def theta(self) -> float:
        """Interferometric phase theta_jk = (Omega_j - Omega_k) tau_i."""
        return (self.herald_j - self.herald_k) * self.tau_i

    def swapped(self) -> "HeraldSetting":
        return HeraldSetting(self.herald_k, self.herald_j, self.tau_i)


@dataclass(eq=False)
class HeraldedMode:
    """Signal mode conditioned on an idler detection at one frequency.

    `values` holds phi(omega) on `grid`, L2-normalized with the grid's
    quadrature weights.  `norm_density` is the idler spectral density
    N = rho_i(Omega, Omega) that normalized the raw column f(., Omega).
    """

    grid: FrequencyGrid
    values: np.ndarray
    herald_detuning: float
    norm_density: float
    source: int = 1

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex)
        if v.shape != (self.grid.count,):
            raise ValueError("mode samples do not match the grid")
        n = self._norm_sq(v)
        if abs(n - 1.0) > 1e-6:
            raise ValueError(f"mode is not L2-normalized (norm^2 = {n:.8f})")
        self.values = v

    def _norm_sq(self, v) -> float:
        w = simpson_weights(self.grid.count, self.grid.spacing)
        return float(np.real(np.sum(w * np.abs(v) ** 2)))

    @property
    def center(self) -> float:
        """First moment of |phi|^2 (detuning, rad/ps)."""
        w = simpson_weights(self.grid.count, self.grid.spacing)
        return float(np.real(np.sum(w * self.grid.detunings * np.abs(self.values) ** 2)))

    def overlap(self, other: "HeraldedMode") -> complex:
        """<self|other> by quadrature; both modes must share a grid."""
        if other.grid is not self.grid and (
            other.grid.count != self.grid.count
            or abs(other.grid.spacing - self.grid.spacing) > 1e-12 * self.grid.spacing
            or abs(other.grid.center - self.grid.center) > 1e-9
        ):
            raise ValueError("modes live on different grids")
        w = simpson_weights(self.grid.count, self.grid.spacing)
        return complex(np.sum(w * np.conj(self.values) * other.values))


def _amplitude_column(jsa: JSAModel, grid: FrequencyGrid, herald: float) -> np.ndarray:
    return np.asarray(jsa.amplitude(grid.detunings, herald), dtype=complex)


def heralded_mode(jsa: JSAModel, herald_detuning: float,
                  grid: FrequencyGrid | None = None, source: int = 1) -> HeraldedMode:
    """Normalize the JSA column at one idler frequency into a signal mode.

    phi(omega) = f(omega, Omega) / sqrt(rho_i(Omega, Omega)).

    Raises ValueError when the idler density at Omega is below
    ``DENSITY_FLOOR`` of its peak: there the mode is undefined.
    """
    g = grid or jsa.default_grid_s()
    col = _amplitude_column(jsa, g, herald_detuning)
    w = simpson_weights(g.count, g.spacing)
    density = float(np.sum(w * np.abs(col) ** 2))
    peak = _peak_herald_density(jsa)
    if density < DENSITY_FLOOR * peak:
        raise ValueError(
            f"idler density at detuning {herald_detuning:g} rad/ps is below "
            f"{DENSITY_FLOOR:g} of its peak; heralded mode undefined"
        )
    return HeraldedMode(
        grid=g,
        values=col / np.sqrt(density),
        herald_detuning=herald_detuning,
        norm_density=density,
        source=source,
    )


def _peak_herald_density(jsa: JSAModel) -> float:
    """Peak of the idler spectral density rho_i(y, y)."""
    if isinstance(jsa, GaussianJSA):
        return float(jsa.idler_spectral_density(0.0))
    gs = jsa.default_grid_s()
    gi = jsa.default_grid_i()
    f = jsa.sample(gs, gi)
    w = simpson_weights(gs.count, gs.spacing)
    diag = np.sum(w[:, None] * np.abs(f) ** 2, axis=0)
    return float(diag.max())


@dataclass(eq=False)
class HeraldedBellState:
    """Two-mode signal state heralded by an idler coincidence.

    `degenerate` marks measure-zero heralds (C_jk ~ 0, p_jk ~ 0); downstream
    observables return zeros for flagged states rather than dividing by the
    vanishing norm.
    """

    mode_j: HeraldedMode
    mode_k: HeraldedMode
    setting: HeraldSetting
    overlap: complex
    c_norm: float
    p_density: float
    degenerate: bool = False

    def __post_init__(self):
        expected = 1.0 - abs(self.overlap) ** 2 * np.cos(self.setting.theta)
        if abs(self.c_norm - expected) > 1e-8:
            raise ValueError("norm constant inconsistent with overlap and phase")
        if not (-1e-12 <= self.c_norm <= 2.0 + 1e-12):
            raise ValueError(f"norm constant {self.c_norm} outside [0, 2]")
        if self.p_density < -1e-12:
            raise ValueError(f"negative herald probability density {self.p_density}")
        self.p_density = max(self.p_density, 0.0)

    @property
    def theta(self) -> float:
        return self.setting.theta

    @property
    def coefficient_matrix(self) -> np.ndarray:
        """2x2 coherence matrix in the {|jk>, |kj>} mode basis.

        Hermitian rank-1 representation of the pure heralded state; the
        off-diagonal phase carries theta_jk.
        """
        if self.degenerate:
            return np.zeros((2, 2), dtype=complex)
        c = np.array([1.0, -np.exp(1j * self.theta)]) / np.sqrt(2 * self.c_norm)
        return np.outer(c, c.conj())

    def joint_amplitude(self) -> np.ndarray:
        """Normalized two-photon amplitude A(omega_1, omega_2) on the mode grid.

        A = [phi_j(w1) phi_k(w2) - e^{i theta} phi_k(w1) phi_j(w2)] / sqrt(2 C).
        Returns a zero array for degenerate-flagged states.
        """
        pj = self.mode_j.values
        pk = self.mode_k.values
        if self.degenerate:
            return np.zeros((pj.size, pk.size), dtype=complex)
        raw = np.outer(pj, pk) - np.exp(1j * self.theta) * np.outer(pk, pj)
        return raw / np.sqrt(2 * self.c_norm)


def herald(jsa: JSAModel, setting: HeraldSetting,
           grid: FrequencyGrid | None = None) -> HeraldedBellState:
    """Construct the heralded Bell state for one idler coincidence outcome.

    All ingredients come from quadrature on the sampled modes, so the same
    code path serves every JSA model; Gaussian closed forms are available
    separately for cross-checking.
    """
    mode_j = heralded_mode(jsa, setting.herald_j, grid)
    mode_k = heralded_mode(jsa, setting.herald_k, grid)
    ov = mode_j.overlap(mode_k)
    c = 1.0 - abs(ov) ** 2 * np.cos(setting.theta)
    # guard tiny negative round-off before the sqrt paths downstream
    c = max(c, 0.0)
    p = 0.5 * mode_j.norm_density * mode_k.norm_density * c
    return HeraldedBellState(
        mode_j=mode_j,
        mode_k=mode_k,
        setting=setting,
        overlap=ov,
        c_norm=c,
        p_density=p,
        degenerate=bool(c < DEGENERATE_TOL),
    )


# ----------------------------------------------------------------------
# Gaussian closed forms (oracle counterparts of the quadrature paths)


def mode_overlap_closed(jsa: GaussianJSA, herald_j: float, herald_k: float) -> float:
    """<phi_j|phi_k> for the Gaussian model.

    Modes are Gaussians of width sigma_s whose centers sit at
    -2 alpha sigma_s^2 Omega, so the overlap is
    exp[-(omega_j - omega_k)^2 / (8 sigma_s^2)] in the mode centers.
    """
    d = jsa.mode_slope * (herald_j - herald_k)
    return float(np.exp(-(d**2) / (8 * jsa.sigma_s**2)))


def herald_probability_closed(jsa: GaussianJSA, herald_j, herald_k,
                              tau_i: float = 0.0):
    """p_jk = (1/2)[N_j N_k - |rho_i(O_j, O_k)|^2 cos theta_jk], closed form.

    Broadcasts over herald detunings; returns a float for scalar inputs.
    """
    hj = np.asarray(herald_j, dtype=float)
    hk = np.asarray(herald_k, dtype=float)
    nj = jsa.idler_spectral_density(hj)
    nk = jsa.idler_spectral_density(hk)
    off = jsa.rho_i(hj, hk)
    theta = (hj - hk) * tau_i
    p = 0.5 * (nj * nk - np.abs(off) ** 2 * np.cos(theta))
    if p.ndim == 0:
        return float(p)
    return p


def pjk_map(jsa: JSAModel, tau_i: float = 0.0,
            grid: FrequencyGrid | None = None,
            method: str = "auto") -> tuple[FrequencyGrid, np.ndarray]:
    """Herald coincidence density p_jk over a grid x grid of idler bins.

    Built from the idler reduced density matrix, which covers every JSA
    model: p_jk = (1/2)[rho_ii rho_kk - |rho_ik|^2 cos((O_j - O_k) tau_i)].
    Returns the idler grid and the map (axis 0 = Omega_j, axis 1 = Omega_k).
    """
    g = grid or jsa.default_grid_i()
    rho = reduced_density(jsa, "idler", g, method=method)
    diag = np.real(np.diag(rho.values))
    om = g.detunings
    theta = (om[:, None] - om[None, :]) * tau_i
    pmap = 0.5 * (
        np.outer(diag, diag) - np.abs(rho.values) ** 2 * np.cos(theta)
    )
    low = pmap.min()
    if low < -1e-12 * pmap.max():
        raise AssertionError(f"herald map has negative density {low:.3e}")
    return g, np.clip(pmap, 0.0, None)


def bsm_success_probability(jsa: JSAModel, tau_i: float = 0.0,
                            grid: FrequencyGrid | None = None,
                            method: str = "quadrature") -> float:
    """Total idler-coincidence probability, integrated over all bins.

    Equals (1/2)[1 - Re I(tau_i)] with
    I = int dy dy' |rho_i(y, y')|^2 e^{i (y - y') tau_i}; at tau_i = 0 this
    is (1/2)(1 - Tr rho_i^2).  The Gaussian closed form is
    (1/2)(1 - e^{-sigma_i^2 tau_i^2} / K).
    """
    if method == "closed":
        if not isinstance(jsa, GaussianJSA):
            raise ValueError("closed form requires a Gaussian model")
        return float(
            0.5 * (1.0 - np.exp(-jsa.sigma_i**2 * tau_i**2) / jsa.schmidt_number)
        )
    g = grid or jsa.default_grid_i()
    rho = reduced_density(jsa, "idler", g, method="quadrature")
    w = simpson_weights(g.count, g.spacing)
    om = g.detunings
    phase = np.exp(1j * (om[:, None] - om[None, :]) * tau_i)
    val = np.sum(w[:, None] * w[None, :] * np.abs(rho.values) ** 2 * phase)
    return float(0.5 * (1.0 - np.real(val)))
