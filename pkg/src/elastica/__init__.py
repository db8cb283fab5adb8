"""Finite-element solver and phase-field optimal design for a clamped elastic beam."""

from .adjoint import DesignParams, adjoint_solve, compliance, fd_gradient_check, reduced_gradient
from .config import ExperimentConfig, parse_config
from .design import bfgs_optimize, check_optimality_condition, check_ordered, extract_interfaces
from .experiments import run_experiment
from .fem import FeFunction, QuadratureRule, UniformGrid, build_grid, integrate, prolongate, solve_tridiagonal
from .homogenization import homogenization_experiment, laminate
from .state import BeamProblem, PointConstraint, multilevel_solve, newton_solve, solve_branch

__all__ = [
    "BeamProblem",
    "DesignParams",
    "ExperimentConfig",
    "FeFunction",
    "PointConstraint",
    "QuadratureRule",
    "UniformGrid",
    "adjoint_solve",
    "bfgs_optimize",
    "build_grid",
    "check_optimality_condition",
    "check_ordered",
    "compliance",
    "extract_interfaces",
    "fd_gradient_check",
    "homogenization_experiment",
    "integrate",
    "laminate",
    "multilevel_solve",
    "newton_solve",
    "parse_config",
    "prolongate",
    "reduced_gradient",
    "run_experiment",
    "solve_branch",
    "solve_tridiagonal",
]
