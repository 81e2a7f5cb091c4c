"""Simulation and analysis toolkit for spectrally resolved four-photon
entanglement swapping.

Layers, bottom up: frequency grids and quadrature (`grid`), two-photon
amplitude models (`jsa`), heralded Bell states from a spectrally resolved
idler measurement (`heralding`), interference observables (`observables`),
finite-resolution mixed states (`mixed`), source-mismatch diagnostics
(`distinguish`), spectrometer and time-tagging hardware (`instrument`),
the Monte Carlo event simulator (`events`), fitting and mode selection
(`analysis`), text I/O (`io`), run configuration (`config`), and the
command-line interface (`cli`).
"""

from .analysis import (FringeFit, OverlapMatrix, exhaustive_orthogonal,
                       fit_fringes, overlap_matrix, select_orthogonal,
                       symmetrize_jsi, visibility)
from .distinguish import (ShiftedJSA, double_pair_overlap, exchange_term,
                          fourfold_phase_fringes, herald_visibility,
                          pump_phase_fringes, source_overlap,
                          swapped_fourfold_probability, translated)
from .events import (EventStream, ExperimentConfig, coincidence_probability,
                     herald_pixel_map, sample_events, scan, subtract_scan)
from .grid import FrequencyGrid, angular_frequency, wavelength
from .heralding import (HeraldSetting, HeraldedBellState, HeraldedMode,
                        bsm_success_probability, herald, pjk_map)
from .instrument import PixelMap, TofsConfig, freq_to_time, pixel_histogram
from .jsa import (GaussianJSA, GriddedJSA, SchmidtDecomposition, SincJSA,
                  blurred_intensity, reduced_density, schmidt_decompose)
from .mixed import (MixedHeraldedState, SpectralFilter, band_purity_reduced,
                    gaussian_filter_purity, hom_purity_bound,
                    mixed_fringes, mixed_heralded_state, mixed_jsi,
                    rect_filter_bank)
from .observables import (FringeTrace, Peak2D, fourfold_landscape,
                          fourfold_landscape_closed, fringe_degenerate,
                          fringe_pjk, fringe_pjk_closed, fringe_pjk_far_bin,
                          heralded_jsi, summed_jsi)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
