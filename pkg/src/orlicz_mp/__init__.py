"""Orlicz-space toolkit and two-solution variational solver for -div(phi(|grad u|) grad u) = lam f(x, u)."""
from .discretization import (
    DiscreteFunction,
    EnergyFunctional,
    Mesh,
    dom_diagnostics,
    energy,
    make_mesh,
    residual,
)
from .errors import (
    BadResolution,
    CollapsedPath,
    ConfigParse,
    DegenerateIndex,
    HypothesisFailed,
    LambdaTooSmall,
    MaxIterations,
    NoBracket,
    NonDecreasingStep,
    NonMonotoneDensity,
    NonzeroBoundary,
    NoPositivePlateau,
    OrliczError,
    OverflowDomain,
    ParamOutOfRange,
    UnknownModel,
)
from .modular import luxemburg_norm, modular, verify_holder, verify_modular_poincare, verify_young
from .nfunction import (
    CATALOG_NAMES,
    Density,
    NFunction,
    build_nfunction,
    catalog,
    check_delta2,
    complementary,
    complementary_nfunction,
    indices,
)
from .nonlinearity import Nonlinearity, check_hypotheses, model_f, truncate
from .solver import (
    SolverReport,
    Tolerances,
    lambda_star,
    minimize_I,
    mountain_pass,
    solve_two,
    verify_mp_geometry,
)

__version__ = "0.1.0"

__all__ = [
    "DiscreteFunction",
    "EnergyFunctional",
    "Mesh",
    "dom_diagnostics",
    "energy",
    "make_mesh",
    "residual",
    "BadResolution",
    "CollapsedPath",
    "ConfigParse",
    "DegenerateIndex",
    "HypothesisFailed",
    "LambdaTooSmall",
    "MaxIterations",
    "NoBracket",
    "NonDecreasingStep",
    "NonMonotoneDensity",
    "NonzeroBoundary",
    "NoPositivePlateau",
    "OrliczError",
    "OverflowDomain",
    "ParamOutOfRange",
    "UnknownModel",
    "luxemburg_norm",
    "modular",
    "verify_holder",
    "verify_modular_poincare",
    "verify_young",
    "CATALOG_NAMES",
    "Density",
    "NFunction",
    "build_nfunction",
    "catalog",
    "check_delta2",
    "complementary",
    "complementary_nfunction",
    "indices",
    "Nonlinearity",
    "check_hypotheses",
    "model_f",
    "truncate",
    "SolverReport",
    "Tolerances",
    "lambda_star",
    "minimize_I",
    "mountain_pass",
    "solve_two",
    "verify_mp_geometry",
]
