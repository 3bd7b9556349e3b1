"""Nonlinear Hodge-Frobenius equations on uniform planar grids.

Modules
-------
density   mass densities rho(Q) and their scalar diagnostics
dec       discrete forms, d, star, wedge, codifferential, norms
homotopy  radial homotopy operator and exact / anti-exact splitting
solver    variational solver for delta[rho(Q) exp(2 eta) du] = 0
backlund  density duality and eikonal transforms
analysis  mean-value, singularity and coefficient-smallness monitors
cli       configuration-driven command line
"""

from .dec import (BranchCut, DiscreteForm, FrobeniusCoefficient, Grid2, codiff, d, l2_inner,
                  l2_norm, q_field, star, sup_norm, wedge)
from .density import DensityReport, MassDensity, check_hypotheses, lemma2_constant, sonic_q
from .errors import (ConfigError, DegreeError, DomainError, DualityViolation, EvaluationError,
                     GeometryError, HodgeFrobeniusError, HypothesisViolation, ShapeError,
                     SolverError)
from .homotopy import RadialHomotopyContext, homotopy, recursive_decompose, split
from .solver import (ProblemSpec, SolveReport, SolverConfig, energy, frobenius_residual,
                     residual, solve, solve_linear)

__version__ = "0.1.0"

__all__ = [
    "BranchCut", "DiscreteForm", "FrobeniusCoefficient", "Grid2", "codiff", "d", "l2_inner",
    "l2_norm", "q_field", "star", "sup_norm", "wedge",
    "DensityReport", "MassDensity", "check_hypotheses", "lemma2_constant", "sonic_q",
    "ConfigError", "DegreeError", "DomainError", "DualityViolation", "EvaluationError",
    "GeometryError", "HodgeFrobeniusError", "HypothesisViolation", "ShapeError", "SolverError",
    "RadialHomotopyContext", "homotopy", "recursive_decompose", "split",
    "ProblemSpec", "SolveReport", "SolverConfig", "energy", "frobenius_residual", "residual",
    "solve", "solve_linear",
]
