"""Mixed local/nonlocal p-Laplacian eigenvalues and their p -> infinity limit."""

from .discretize import EnergyModel, Grid
from .eigensolver import ConvergenceError, EigenReport, SolverOptions, UnsupportedExponentError, solve_first, sweep_p
from .geometry import Ball, Box, Interval, Polygon, dilate, domain_from_dict, inradius, inradius_data
from .kernel import Kernel, ResolutionError, quadrature_weights
from .limit import inf_quotient, lambda_for, lambda_formula, verify_lower_bounds
from .viscosity import residual_report

__all__ = [
    "Ball",
    "Box",
    "ConvergenceError",
    "EigenReport",
    "EnergyModel",
    "Grid",
    "Interval",
    "Kernel",
    "Polygon",
    "ResolutionError",
    "SolverOptions",
    "UnsupportedExponentError",
    "dilate",
    "domain_from_dict",
    "inf_quotient",
    "inradius",
    "inradius_data",
    "lambda_for",
    "lambda_formula",
    "quadrature_weights",
    "residual_report",
    "solve_first",
    "sweep_p",
    "verify_lower_bounds",
]
__version__ = "0.1.0"
