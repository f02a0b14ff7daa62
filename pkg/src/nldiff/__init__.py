"""Nonlocal diffusion on a bounded interval with Dirichlet data on the extended boundary."""
__version__ = "0.1.0"

from .kernel import Kernel, KernelSpec, build_kernel, mass_on_set
from .geometry import (EXTENDED_BOUNDARY, EXTERIOR, INTERIOR, DomainGeometry, LambdaGammaReport,
                       LambdaCondition, LambdaVerdict, build_geometry, check_lambda_conditions, lambda_gamma)
from .operator import BoundaryData, CompatibilityError, Field, Operator, apply_K, extend
from .evolution import (ComparisonReport, SolveResult, SolverConfig, SolverError, picard_solve,
                        solve, step_explicit, verify_comparison)
from .viscous import LayerReport, ViscousConfig, boundary_layer_study, solve_viscous
from .stochastic import McConfig, McDensity, compare_density, simulate
from .analysis import check_bounds, modulus, positivity_study, modulus_bound
from ._backend import NAME as BACKEND

__all__ = [
    "BACKEND", "BoundaryData", "CompatibilityError", "ComparisonReport", "DomainGeometry",
    "EXTENDED_BOUNDARY", "EXTERIOR", "Field", "INTERIOR", "Kernel", "KernelSpec",
    "LambdaGammaReport", "LayerReport", "McConfig", "McDensity", "Operator", "LambdaCondition",
    "LambdaVerdict", "SolveResult", "SolverConfig", "SolverError", "ViscousConfig", "apply_K",
    "boundary_layer_study", "build_geometry", "build_kernel", "check_bounds",
    "check_lambda_conditions", "compare_density", "extend", "lambda_gamma", "mass_on_set", "modulus",
    "picard_solve", "positivity_study", "simulate", "solve", "solve_viscous", "step_explicit",
    "modulus_bound", "verify_comparison",
]
