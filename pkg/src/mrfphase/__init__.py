"""Uniqueness and phase behaviour of second-order Markov random fields on regular trees and graphs."""

from .fixedpoint import NONUNIQUE, UNDETERMINED, UNIQUE, FixedPointReport, classify_uniqueness, solve_diagonal
from .model import ModelSpec, NeighborDistribution, ThetaVector, induced_mu, theta_for_family
from .phase import critical_bracket, hardcore_critical_activity, lambda_lower, lambda_upper

__all__ = [
    "NONUNIQUE",
    "UNDETERMINED",
    "UNIQUE",
    "FixedPointReport",
    "ModelSpec",
    "NeighborDistribution",
    "ThetaVector",
    "classify_uniqueness",
    "critical_bracket",
    "hardcore_critical_activity",
    "induced_mu",
    "lambda_lower",
    "lambda_upper",
    "solve_diagonal",
    "theta_for_family",
]
