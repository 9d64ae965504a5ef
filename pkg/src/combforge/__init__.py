"""Stationary pulse trains of the damped, forced NLS and their stability."""

from .grid import Comb, Field2, Grid, comb, derivative, even_project
from .model import BifurcationAngles, Params, SolitonTemplate, bifurcation_angles, build_guess, soliton_profile
from .stationary import NewtonOpts, Solution, continue_in, detect_pulses, newton_solve, one_pulse, residual

__version__ = "0.1.0"

__all__ = [
    "Comb",
    "Field2",
    "Grid",
    "comb",
    "derivative",
    "even_project",
    "BifurcationAngles",
    "Params",
    "SolitonTemplate",
    "bifurcation_angles",
    "build_guess",
    "soliton_profile",
    "NewtonOpts",
    "Solution",
    "continue_in",
    "detect_pulses",
    "newton_solve",
    "one_pulse",
    "residual",
]
