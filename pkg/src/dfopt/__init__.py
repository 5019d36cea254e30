"""Derivative-free global optimization on bounded boxes."""
from .acquisition import EI, MPI, UCB, BayesOptConfig, bayesopt_run
from .benchmarks import TestFunction, available, get_function, grid_oracle
from .core import (
    BudgetExhausted,
    DfoptError,
    DomainError,
    NoiseModel,
    NumericalError,
    SearchDomain,
    Sense,
    Trace,
)
from .direct import direct_run
from .gp import Matern, SquaredExponential, SquaredExponentialARD, SquaredExponentialWidth, gp_fit, gp_posterior
from .lipo import adalipo_run, lipo_run
from .mcs import mcs_run
from .shubert import shubert_run

__version__ = "0.1.0"

__all__ = [
    "TestFunction", "available", "get_function", "grid_oracle",
    "EI", "MPI", "UCB", "BayesOptConfig", "bayesopt_run",
    "BudgetExhausted", "DfoptError", "DomainError", "NoiseModel", "NumericalError", "SearchDomain", "Sense", "Trace",
    "direct_run", "Matern", "SquaredExponential", "SquaredExponentialARD", "SquaredExponentialWidth",
    "gp_fit", "gp_posterior", "adalipo_run", "lipo_run", "mcs_run", "shubert_run",
]
