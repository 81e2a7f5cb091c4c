"""Plain-text `key = value` run configuration.

A configuration file holds source parameters, herald-bin calibration,
instrument settings, and Monte Carlo knobs.  Parsing is strict: unknown
keys, malformed values, and module-precondition violations are all
reported with the offending key (and line) before any computation
starts.  The semantic hash covers the parsed values only, so comment or
whitespace edits do not change a run's identity but any meaningful key
does.
"""

import hashlib
from dataclasses import dataclass

from .events import ExperimentConfig
from .grid import TWO_PI_C, angular_frequency
from .instrument import TofsConfig
from .jsa import GaussianJSA, SincJSA
from .mixed import SpectralFilter


def _parse_bool(text: str) -> bool:
    low = text.lower()
    if low in ("true", "yes", "1", "on"):
        return True
    if low in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


# key -> (type caster, default); None default means "required by the
# commands that consume it", enforced in the builders below.
SCHEMA = {
    # source
    "jsa_model": (str, "gaussian"),
    "center_wavelength_nm": (float, 830.0),
    "sigma_s": (float, 1.25),
    "sigma_i": (float, 1.25),
    "alpha": (float, 0.31353),
    "pump_sigma": (float, 1.0),
    "slope_s": (float, 1.0),
    "slope_i": (float, -1.0),
    "crystal_length": (float, 1.0),
    # numerics
    "grid_points": (int, 512),
    "grid_halfwidth": (float, 0.0),  # rad/ps; 0 picks the model default
    # herald-bin calibration
    "bin_separation_nm": (float, 2.0),
    # delays (ps)
    "tau_s": (float, 0.0),
    "tau_i": (float, 0.0),
    # second source, for distinguishability studies (rigid translations)
    "delta_s": (float, 0.0),
    "delta_i": (float, 0.0),
    # heralding filter, for mixed-state purities
    "filter_width_nm": (float, 0.1),
    "filter_shape": (str, "rect"),
    # Monte Carlo
    "pulses": (int, 200000),
    "seed": (int, 1),
    "eta_1": (float, 0.05),
    "eta_2": (float, 0.05),
    "measurement": (str, "verification"),
    "pump_mode": (str, "averaged"),
    "pump_phase": (float, 0.0),
    "block_pulses": (int, 65536),
    "herald_cells": (int, 256),
    "signal_cells": (int, 512),
    "efficiency_c": (float, 1.0),
    "efficiency_d": (float, 1.0),
    "efficiency_x": (float, 1.0),
    "efficiency_y": (float, 1.0),
    # time-of-flight spectrometers on the listed channels
    "tofs_channels": (str, ""),
    "tofs_dispersion_ps_nm": (float, 1000.0),
    "tofs_tdc_bin_ps": (float, 100.0),
    "tofs_window_nm": (float, 10.0),
    "tofs_jitter_fwhm_ps": (float, 0.0),
    "tofs_loss_db": (float, 0.0),
}

_CASTERS = {float: float, int: int, str: str, bool: _parse_bool}


class ConfigError(ValueError):
    """Configuration file rejected; message names the offending key."""


def parse_config(text: str) -> dict:
    """Parse `key = value` lines into a fully-defaulted mapping."""
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', "
                              f"got {raw.strip()!r}")
        key, _, val = (part.strip() for part in line.partition("="))
        if key not in SCHEMA:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        caster, _default = SCHEMA[key]
        try:
            values[key] = _CASTERS[caster](val)
        except ValueError:
            raise ConfigError(
                f"line {lineno}: key {key!r} expects "
                f"{caster.__name__}, got {val!r}") from None
    for key, (_caster, default) in SCHEMA.items():
        values.setdefault(key, default)
    return values


@dataclass(eq=False)
class RunConfig:
    """Parsed configuration plus typed builders for the other modules."""

    values: dict

    def __getitem__(self, key):
        return self.values[key]

    @property
    def center(self) -> float:
        """Carrier angular frequency (rad/ps)."""
        return angular_frequency(self.values["center_wavelength_nm"])

    def jsa(self):
        v = self.values
        if v["jsa_model"] == "gaussian":
            return GaussianJSA(center=self.center, sigma_s=v["sigma_s"],
                               sigma_i=v["sigma_i"], alpha=v["alpha"])
        if v["jsa_model"] == "sinc":
            return SincJSA(center=self.center, pump_sigma=v["pump_sigma"],
                           slope_s=v["slope_s"], slope_i=v["slope_i"],
                           length=v["crystal_length"])
        raise ConfigError(f"key 'jsa_model': unknown model {v['jsa_model']!r}")

    def grid_for(self, jsa, axis: str = "idler", count: int | None = None):
        v = self.values
        n = count if count is not None else v["grid_points"]
        if v["grid_halfwidth"] > 0:
            from .grid import FrequencyGrid
            return FrequencyGrid.symmetric(0.0, v["grid_halfwidth"], n)
        maker = jsa.default_grid_i if axis == "idler" else jsa.default_grid_s
        return maker(n)

    def bin_step(self) -> float:
        """Herald-bin pitch as a detuning (rad/ps)."""
        lam = self.values["center_wavelength_nm"]
        return self.values["bin_separation_nm"] * TWO_PI_C / lam**2

    def bin_detuning(self, index: float) -> float:
        """Detuning of herald bin `index` (index 0 sits at the carrier)."""
        return index * self.bin_step()

    def spectral_filter(self) -> SpectralFilter:
        v = self.values
        width = v["filter_width_nm"] * TWO_PI_C / v["center_wavelength_nm"]**2
        return SpectralFilter(center=0.0, width=width, shape=v["filter_shape"])

    def tofs(self) -> dict:
        v = self.values
        channels = [c.strip() for c in v["tofs_channels"].split(",") if c.strip()]
        if not channels:
            return {}
        cfg = TofsConfig(dispersion=v["tofs_dispersion_ps_nm"],
                         center_wavelength=v["center_wavelength_nm"],
                         jitter_fwhm=v["tofs_jitter_fwhm_ps"],
                         tdc_bin=v["tofs_tdc_bin_ps"],
                         window=v["tofs_window_nm"],
                         insertion_loss_db=v["tofs_loss_db"])
        return {ch: cfg for ch in channels}

    def experiment(self, **overrides) -> ExperimentConfig:
        v = self.values
        fields = dict(
            jsa=self.jsa(),
            eta_1=v["eta_1"], eta_2=v["eta_2"],
            pulses=v["pulses"], seed=v["seed"],
            tau_s=v["tau_s"], tau_i=v["tau_i"],
            measurement=v["measurement"], pump_mode=v["pump_mode"],
            pump_phase=v["pump_phase"],
            tofs=self.tofs(),
            efficiency={ch: v[f"efficiency_{ch}"] for ch in "cdxy"},
            herald_cells=v["herald_cells"], signal_cells=v["signal_cells"],
            block_pulses=v["block_pulses"],
        )
        fields.update(overrides)
        return ExperimentConfig(**fields)

    def validate(self) -> None:
        """Eagerly build every referenced object, surfacing bad values.

        Precondition failures are reported against their key before any
        computation runs.
        """
        try:
            self.jsa()
        except ValueError as exc:
            raise ConfigError(f"source parameters: {exc}") from exc
        try:
            self.tofs()
        except ValueError as exc:
            raise ConfigError(f"tofs settings: {exc}") from exc
        try:
            self.spectral_filter()
        except ValueError as exc:
            raise ConfigError(f"filter settings: {exc}") from exc
        v = self.values
        if v["measurement"] not in ("verification", "jsi"):
            raise ConfigError(f"key 'measurement': {v['measurement']!r} is not "
                              "'verification' or 'jsi'")
        if v["pump_mode"] not in ("averaged", "fixed"):
            raise ConfigError(f"key 'pump_mode': {v['pump_mode']!r} is not "
                              "'averaged' or 'fixed'")
        for key in ("pulses", "grid_points", "seed"):
            if v[key] <= 0:
                raise ConfigError(f"key {key!r}: must be positive")
        if v["bin_separation_nm"] <= 0:
            raise ConfigError("key 'bin_separation_nm': must be positive")
        for key in ("eta_1", "eta_2"):
            if not 0 <= v[key] < 1:
                raise ConfigError(f"key {key!r}: must be in [0, 1)")

    def semantic_hash(self) -> str:
        """sha256 over the parsed values, independent of file cosmetics."""
        lines = [f"{key}={self.values[key]!r}" for key in sorted(self.values)]
        return hashlib.sha256("\n".join(lines).encode()).hexdigest()


def load_config(path) -> RunConfig:
    with open(path) as fh:
        cfg = RunConfig(parse_config(fh.read()))
    cfg.validate()
    return cfg


def default_config() -> RunConfig:
    return RunConfig(parse_config(""))
