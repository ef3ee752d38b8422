"""Two positive solutions of a singular double-phase Dirichlet problem via Nehari-manifold minimisation."""

from .analysis import (
    SweepRow,
    SweepTable,
    ThresholdEstimate,
    estimate_lambda_star,
    estimate_sobolev_constant,
    lambda_sweep,
    minus_norm_lower_bound,
)
from .config import RunConfig, load_config, parse_config
from .errors import (
    BadSize,
    ConfigError,
    DegenerateDirection,
    HypothesisViolation,
    LambdaTooLarge,
    MaxIters,
    NehariError,
    NoBracket,
    NonFinite,
    NotSplit,
)
from .fibering import (
    FiberingRoots,
    NehariClass,
    Problem,
    classify,
    default_problem,
    energy,
    fibering_roots,
    project,
)
from .mesh import GridFunction, build_interval_mesh, build_rect_mesh, integrate
from .orlicz import Exponents, ScalarField, luxemburg_norm, modular
from .solver import (
    SolveReport,
    SolverOptions,
    assemble_residual,
    descend_on_branch,
    find_two_solutions,
    verify_weak_solution,
)

__version__ = "0.1.0"

__all__ = [
    "BadSize",
    "ConfigError",
    "DegenerateDirection",
    "Exponents",
    "FiberingRoots",
    "GridFunction",
    "HypothesisViolation",
    "LambdaTooLarge",
    "MaxIters",
    "NehariClass",
    "NehariError",
    "NoBracket",
    "NonFinite",
    "NotSplit",
    "Problem",
    "RunConfig",
    "ScalarField",
    "SolveReport",
    "SolverOptions",
    "SweepRow",
    "SweepTable",
    "ThresholdEstimate",
    "assemble_residual",
    "build_interval_mesh",
    "build_rect_mesh",
    "classify",
    "default_problem",
    "descend_on_branch",
    "energy",
    "estimate_lambda_star",
    "estimate_sobolev_constant",
    "fibering_roots",
    "find_two_solutions",
    "integrate",
    "lambda_sweep",
    "load_config",
    "luxemburg_norm",
    "minus_norm_lower_bound",
    "modular",
    "parse_config",
    "project",
    "verify_weak_solution",
]
