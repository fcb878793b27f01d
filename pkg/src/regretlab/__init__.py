"""Regret certificates for first-order and adaptive optimizers on convex problems."""
from ._kernels import BACKEND as KERNEL_BACKEND
from .core import GradientHistory, Rng, Trace, dot, mahalanobis_norm, norm2, norm_inf, vector
from .errors import (ConfigError, ConvergenceError, DimensionError, DivergenceError,
                     NonFiniteError, PreconditionError, RegretLabError)

__version__ = "0.1.0"

__all__ = [
    "KERNEL_BACKEND", "GradientHistory", "Rng", "Trace", "dot", "mahalanobis_norm", "norm2",
    "norm_inf", "vector", "ConfigError", "ConvergenceError", "DimensionError",
    "DivergenceError", "NonFiniteError", "PreconditionError", "RegretLabError",
]
