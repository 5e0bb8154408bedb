"""Simulation and PDE tools for one-dimensional skew diffusions whose skewness
acts on moving interface curves."""
from .coefficients import (BetaFunction, CatalogFunction, PiecewiseCoefficient, ProblemSpec,
                           SkewnessSchedule, validate_problem)
from .geometry import CurveFamily, InterfaceCurve, subdomain_index, validate_family
from .pde_solver import TransmissionPDE, evaluate_u, solve, straighten_problem
from .profiles import Profile
from .simulator import SimConfig, estimate_local_time, simulate
from .transform import (RemovalTransform, StraightenTransform, divergence_triple,
                        pushforward_beta, straighten)

__version__ = "0.1.0"

__all__ = [
    "BetaFunction", "CatalogFunction", "CurveFamily", "InterfaceCurve", "PiecewiseCoefficient",
    "ProblemSpec", "Profile", "RemovalTransform", "SimConfig", "SkewnessSchedule",
    "StraightenTransform", "TransmissionPDE", "divergence_triple", "estimate_local_time",
    "evaluate_u", "pushforward_beta", "simulate", "solve", "straighten", "straighten_problem",
    "subdomain_index", "validate_family", "validate_problem",
]
