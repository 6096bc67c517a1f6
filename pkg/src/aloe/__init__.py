"""Active learning for enumerating the local minima of a black-box function.

A Gaussian-process model of the function is conditioned on noisy evaluations;
the posterior over its gradient and Hessian gives confidence intervals that
sort every candidate point into "local minimum", "not a local minimum" or
"unknown".  Query points are chosen to shrink the intervals that block the
classification the most.
"""

from aloe.errors import AloeError, ConfigError, NumericalError, UsageError
from aloe.kernel import KernelParams
from aloe.gp import PosteriorState, fit, prior

__all__ = [
    "AloeError",
    "ConfigError",
    "KernelParams",
    "NumericalError",
    "PosteriorState",
    "UsageError",
    "fit",
    "prior",
]

__version__ = "0.1.0"
