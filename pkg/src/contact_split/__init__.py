"""Displacement/force splitting solvers for frictionless contact problems."""

from .driver import SolveReport, SolverConfig, run_fixed_point
from .oracle import brute_force_kkt, solve_saddle_point_active_set
from .problem import ContactProblem, load_bundle, residual_kkt, save_bundle, validate
from .updates import PenaltySplit, RegularizedUzawa, Uzawa, uzawa_upper_bound

__version__ = "0.1.0"

__all__ = [
    "ContactProblem",
    "SolverConfig",
    "SolveReport",
    "run_fixed_point",
    "solve_saddle_point_active_set",
    "brute_force_kkt",
    "residual_kkt",
    "validate",
    "save_bundle",
    "load_bundle",
    "Uzawa",
    "PenaltySplit",
    "RegularizedUzawa",
    "uzawa_upper_bound",
]
