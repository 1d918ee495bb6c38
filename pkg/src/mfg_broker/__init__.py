"""Mean-field equilibrium between a broker and a population of informed
traders: coefficient solver, Monte Carlo simulator and optimality checks."""

from .equilibrium import (
    MeanFieldCoefficients,
    TraderCoefficients,
    externalisation_limit,
    solve_mean_field,
    solve_trader,
    solve_traders,
)
from .model import ModelParams, TimeGrid, TraderType, TypeDistribution, make_grid, validate_params
from .simulator import SimConfig, simulate_equilibrium

__version__ = "0.1.0"

__all__ = [
    "MeanFieldCoefficients",
    "ModelParams",
    "SimConfig",
    "TimeGrid",
    "TraderCoefficients",
    "TraderType",
    "TypeDistribution",
    "externalisation_limit",
    "make_grid",
    "simulate_equilibrium",
    "solve_mean_field",
    "solve_trader",
    "solve_traders",
    "validate_params",
]
