"""
Stochastic quasigeostrophic flow on the unit square: a sine-Galerkin
simulator, checks of the noise hypotheses behind ergodicity, and Monte Carlo
diagnostics comparing time and ensemble averages.
"""

__version__ = "0.1.0"

from .config import RunConfig, load_config, parse_config
from .domain import PolygonDomain, eigenfunction_bound_check, kappa_estimate
from .ensemble import run_ensemble
from .ergodicity import birkhoff_experiment, ensemble_average, time_average
from .integrator import FlowState, ModelParams, step
from .noise import NoiseSpec, theorem_conditions

__all__ = [
    "RunConfig",
    "load_config",
    "parse_config",
    "PolygonDomain",
    "eigenfunction_bound_check",
    "kappa_estimate",
    "run_ensemble",
    "birkhoff_experiment",
    "ensemble_average",
    "time_average",
    "FlowState",
    "ModelParams",
    "step",
    "NoiseSpec",
    "theorem_conditions",
]
