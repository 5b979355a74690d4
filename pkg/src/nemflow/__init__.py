"""Finite-difference workbench for a simplified Ericksen-Leslie nematic flow.

Incompressible Navier-Stokes on a staggered grid coupled to a Ginzburg-Landau
penalized director, with an energy-law audit, a stationary solver and decay
rate fits.
"""
__version__ = "0.1.0"

from .config import SimConfig, from_dict, load_config, parse_config
from .equilibrium import estimate_theta, fit_decay, lyapunov_gap, solve_steady
from .grid import BoundaryData, Grid, VelocityField
from .material import GinzburgLandau, Params, Quadratic
from .simulator import Model, SimState, energy_audit, integrate, run

__all__ = [
    "BoundaryData", "GinzburgLandau", "Grid", "Model", "Params", "Quadratic", "SimConfig",
    "SimState", "VelocityField", "energy_audit", "estimate_theta", "fit_decay", "from_dict",
    "integrate", "load_config", "lyapunov_gap", "parse_config", "run", "solve_steady",
]
