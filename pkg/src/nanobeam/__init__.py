"""Design and simulation toolkit for 1D photonic-crystal nanobeam cavities.

The pieces, in pipeline order: effective-index reduction of the layer
stack (slab), Bloch bands and mirror-strength optimization of the hole
lattice (bands), cavity assembly and rasterization (geometry), 2D FDTD
ringdown and transmission (fdtd), resonance extraction by harmonic
inversion and Lorentzian fitting (resonance), and parameter sweeps with
design comparison on top (sweeps).  config/io/cli wire it to files and
a command line.
"""

__version__ = "0.1.0"

from .errors import ConfigError, IOFailure, NanobeamError, NumericalError
from .geometry import (CavityDesign, MaterialStack, background_index,
                       beam_width_profile, hole_positions, rasterize,
                       rasterize_reference, unit_cell_raster)
from .slab import cutoff_thickness, slab_neff
from .bands import (BandStructure, MirrorCell, MirrorScan, band_edges,
                    band_structure, mirror_strength, optimize_mirror)
from .fdtd import (RingdownResult, Snapshot, Spectrum, TimeTrace,
                   run_cw_snapshot, run_ringdown, run_transmission,
                   transfer_matrix_transmission)
from .resonance import (LeakageWarning, LorentzianModel, ResonanceResult,
                        harmonic_inversion, lorentzian_fit, mode_volume,
                        purcell_factor)
from .sweeps import (ComparisonReport, ComparisonRow, FixedMirror,
                     FixedTotal, LossDecomposition, SimSettings, SweepPoint,
                     SweepResult, characterize, compare_designs,
                     fit_loss_decomposition, simulate_ringdown,
                     sweep_defect_length, sweep_mirror_holes,
                     sweep_taper_holes)
from .config import (ProjectConfig, SweepSpec, emit_config, load_config,
                     load_preset, parse_config)
from .io import (export_geometry, export_permittivity, export_results,
                 import_spectrum, import_trace, render_results)

__all__ = [
    "__version__",
    "NanobeamError", "ConfigError", "NumericalError", "IOFailure",
    "MaterialStack", "CavityDesign", "hole_positions",
    "beam_width_profile", "background_index", "rasterize",
    "rasterize_reference", "unit_cell_raster",
    "slab_neff", "cutoff_thickness",
    "BandStructure", "MirrorCell", "MirrorScan", "band_structure",
    "band_edges", "mirror_strength", "optimize_mirror",
    "TimeTrace", "Spectrum", "Snapshot", "RingdownResult",
    "run_ringdown", "run_cw_snapshot", "run_transmission",
    "transfer_matrix_transmission",
    "ResonanceResult", "LorentzianModel", "LeakageWarning",
    "harmonic_inversion", "lorentzian_fit", "mode_volume",
    "purcell_factor",
    "SimSettings", "SweepPoint", "SweepResult", "FixedTotal",
    "FixedMirror", "LossDecomposition", "ComparisonRow",
    "ComparisonReport", "characterize", "simulate_ringdown",
    "sweep_defect_length", "sweep_taper_holes", "sweep_mirror_holes",
    "fit_loss_decomposition", "compare_designs",
    "ProjectConfig", "SweepSpec", "parse_config", "emit_config",
    "load_config", "load_preset",
    "export_results", "render_results", "import_spectrum", "import_trace",
    "export_geometry", "export_permittivity",
]
