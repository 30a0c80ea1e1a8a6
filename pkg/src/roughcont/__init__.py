"""Log-scale regularity tools for continuity and transport equations with rough coefficients.

The subpackages are imported lazily by users; the common entry points are
re-exported here.
"""

from .config import ConfigError, ExperimentConfig, load_config, parse_config
from .forge import RoughFieldSpec, block_spectrum_field, make_rng, poisson_coupling, smooth_bump, spectral_field
from .grid import FluxLaw, GridSpec, ScalarField, VectorField, load_field, lp_norm, save_field
from .harness import RunRecord, emit_outputs
from .scheme import CFLError, lax_friedrichs, step, upwind
from .seminorm import SemiNormParams, discrete_seminorm, seminorm_ladder

__all__ = [
    "ConfigError", "ExperimentConfig", "load_config", "parse_config",
    "RoughFieldSpec", "block_spectrum_field", "make_rng", "poisson_coupling", "smooth_bump", "spectral_field",
    "FluxLaw", "GridSpec", "ScalarField", "VectorField", "load_field", "lp_norm", "save_field",
    "RunRecord", "emit_outputs",
    "CFLError", "lax_friedrichs", "step", "upwind",
    "SemiNormParams", "discrete_seminorm", "seminorm_ladder",
]
