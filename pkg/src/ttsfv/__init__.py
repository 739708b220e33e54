"""Stochastic finite volumes on tensor-train grids.

The state of a hyperbolic system with random parameters is stored as one
tensor train per conserved quantity over the joint physical and stochastic
cell grid; WENO3 reconstruction, Rusanov fluxes and SSP Runge-Kutta steps
act on those trains directly.
"""

from .cross import CrossConfig, tt_cross, tt_cross_map
from .engine import BlowUpError, ConservedState, RunReport, SFVSolver, SolverConfig
from .mesh import Distribution, Mesh, StochasticMeasure
from .models import FluxModel, burgers, euler, linear_advection
from .scenarios import REGISTRY, Scenario, get_scenario
from .stats import expectation, run_scenario, std, variance
from .tt import TTTensor, tt_add, tt_dot, tt_hadamard, tt_norm_f, tt_round, tt_scale, tt_svd, tt_to_dense

__all__ = [
    "BlowUpError", "ConservedState", "CrossConfig", "Distribution", "FluxModel", "Mesh", "REGISTRY",
    "RunReport", "SFVSolver", "Scenario", "SolverConfig", "StochasticMeasure", "TTTensor", "burgers",
    "euler", "expectation", "get_scenario", "linear_advection", "run_scenario", "std", "tt_add",
    "tt_cross", "tt_cross_map", "tt_dot", "tt_hadamard", "tt_norm_f", "tt_round", "tt_scale", "tt_svd",
    "tt_to_dense", "variance",
]
__version__ = "0.1.0"
