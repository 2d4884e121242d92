"""Semilinear Dirichlet problems on finite levels of N-corner Sierpinski gaskets."""
from .embedding import constants, kappa, morrey_ratio, sigma, sup_estimate_check
from .energy import (
    DiscreteFunction,
    EnergyForm,
    assemble,
    bilinear,
    energy,
    harmonic_extension,
    norm_alpha,
    prolongation,
)
from .gasket import GasketLevel, build_level, vertex_measures
from .problem import (
    AdmissibilityReport,
    Nonlinearity,
    ProblemSpec,
    Weight,
    admissibility,
    check_alpha,
    check_ar,
    check_f0,
    check_f1,
    lambda_bound,
    lambda_star,
)
from .solver import (
    DiscreteFunctional,
    SolveReport,
    Solution,
    solve_local_min,
    solve_mountain_pass,
    solve_newton_deflated,
    two_solutions,
)

__version__ = "0.1.0"

__all__ = [
    "AdmissibilityReport",
    "DiscreteFunction",
    "DiscreteFunctional",
    "EnergyForm",
    "GasketLevel",
    "Nonlinearity",
    "ProblemSpec",
    "Solution",
    "SolveReport",
    "Weight",
    "admissibility",
    "assemble",
    "bilinear",
    "build_level",
    "check_alpha",
    "check_ar",
    "check_f0",
    "check_f1",
    "constants",
    "energy",
    "harmonic_extension",
    "kappa",
    "lambda_bound",
    "lambda_star",
    "morrey_ratio",
    "norm_alpha",
    "prolongation",
    "sigma",
    "solve_local_min",
    "solve_mountain_pass",
    "solve_newton_deflated",
    "sup_estimate_check",
    "two_solutions",
    "vertex_measures",
]
