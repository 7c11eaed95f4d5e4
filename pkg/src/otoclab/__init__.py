"""Out-of-time-order correlators of coupled kicked rotors.

Floquet propagation on the quantum torus, exact and stochastic OTOC
estimators, the classical coupled standard map, a random-matrix model of
relaxation, Husimi diagnostics and a reproducible command-line driver.
"""
__version__ = "0.1.0"

from .core import (DimensionError, FitDomainError, OtocSeries, ParameterError,
                   SimParams)
from .floquet import CompositePropagator, CoupledKickedRotors
from .otoc import otoc_exact, otoc_stochastic
from .classical import ClassicalParams, classical_otoc, lyapunov_max
from .fitting import (fit_lyapunov, fit_power_law, fit_relaxation,
                      ehrenfest_time)
from .rmt import RmtParams, analytic_otoc, mu_kicked, mu_rmt, rmt_otoc
from .husimi import coherent_state, husimi_grid, reduced_density, purity
from .config import ExperimentConfig, parse_config, serialize_config

__all__ = [
    "__version__",
    "SimParams", "OtocSeries", "ParameterError", "DimensionError", "FitDomainError",
    "CompositePropagator", "CoupledKickedRotors",
    "otoc_exact", "otoc_stochastic",
    "ClassicalParams", "classical_otoc", "lyapunov_max",
    "fit_lyapunov", "fit_power_law", "fit_relaxation", "ehrenfest_time",
    "RmtParams", "analytic_otoc", "mu_kicked", "mu_rmt", "rmt_otoc",
    "coherent_state", "husimi_grid", "reduced_density", "purity",
    "ExperimentConfig", "parse_config", "serialize_config",
]
