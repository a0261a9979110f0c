"""Hierarchical fixed-point iterations for trilevel and multilevel convex problems.

A selector contraction ``S`` and proximal-gradient layer maps are combined
with predetermined step sizes; the iterates approach the point singled out
by the selector among the solutions of the nested lower levels.
"""

from .exceptions import (DivergedError, FitError, HierProxError, InputError, OracleUnsupported,
                         ParameterError, ScheduleError, UnboundedError)
from .operators import LayerMap, ProxableSpec, SmoothSpec, contraction, custom_scalar, proxgrad
from .problems import AffineSet, BoxSet, GalleryEntry, gallery, nested_solve_oracle, problem_oracle
from .schedules import Schedule, classify_regime, make_multilevel_weights
from .solver import (MultilevelProblem, SolverConfig, Trace, TrilevelProblem, multilevel_solve,
                     multilevel_step, solve, trilevel_solve, trilevel_step)

__version__ = "0.1.0"

__all__ = [
    "AffineSet", "BoxSet", "DivergedError", "FitError", "GalleryEntry", "HierProxError", "InputError",
    "LayerMap", "MultilevelProblem", "OracleUnsupported", "ParameterError", "ProxableSpec", "Schedule",
    "ScheduleError", "SmoothSpec", "SolverConfig", "Trace", "TrilevelProblem", "UnboundedError",
    "classify_regime", "contraction", "custom_scalar", "gallery", "make_multilevel_weights",
    "multilevel_solve", "multilevel_step", "nested_solve_oracle", "problem_oracle", "proxgrad", "solve",
    "trilevel_solve", "trilevel_step",
]
