"""Solver for nonlinear integral equations on the half-line with a Volterra
term over [0, t] and an exponentially weighted tail term over [t, inf)."""

from .problem import (Constants, HalfLineProblem, InvalidProblemError, KernelPair, RegularityData,
                      ValidationReport, contraction_q, from_memory_ide, linear_problem, pointwise,
                      safe_radius, time_reverse, validate)
from .solver import GridSolution, SolveReport, gronwall_zeta, picard_solve, solve
from .system import NodeSequence, TruncatedSystem, apply_operator, assemble, residual, untransform
from .weights import DeltaParams, Grid, UnsolvableConfigurationError, select_delta, theta

__all__ = [
    "Constants", "HalfLineProblem", "InvalidProblemError", "KernelPair", "RegularityData",
    "ValidationReport", "contraction_q", "from_memory_ide", "linear_problem", "pointwise",
    "safe_radius", "time_reverse", "validate",
    "GridSolution", "SolveReport", "gronwall_zeta", "picard_solve", "solve",
    "NodeSequence", "TruncatedSystem", "apply_operator", "assemble", "residual", "untransform",
    "DeltaParams", "Grid", "UnsolvableConfigurationError", "select_delta", "theta",
]
