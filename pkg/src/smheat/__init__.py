"""Stochastic heat equation driven by a general stochastic measure in time."""

from .errors import AssumptionError, ConfigError, ConvergenceError, FlatPathError

__version__ = "0.1.0"

__all__ = ["AssumptionError", "ConfigError", "ConvergenceError", "FlatPathError", "__version__"]
