"""Certainty equivalents (OCE, MOCE) and robust MOCE over Kantorovich balls of utilities."""

from .certainty import cvar, cvar_via_oce, moce, moce_exponential_closed_form, oce
from .distributions import DiscreteDistribution, DistributionSpec, sample
from .rmoce import KantorovichBall, RmoceProblem, build_problem, solve_alternating, solve_direct
from .utility import Exponential, PiecewiseLinearUtility, TwoPieceLinear, project_to_grid, uniform_grid

__all__ = [
    "DiscreteDistribution",
    "DistributionSpec",
    "Exponential",
    "KantorovichBall",
    "PiecewiseLinearUtility",
    "RmoceProblem",
    "TwoPieceLinear",
    "build_problem",
    "cvar",
    "cvar_via_oce",
    "moce",
    "moce_exponential_closed_form",
    "oce",
    "project_to_grid",
    "sample",
    "solve_alternating",
    "solve_direct",
    "uniform_grid",
]
