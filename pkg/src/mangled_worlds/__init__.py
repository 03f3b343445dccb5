"""Exact and analytic world counting for branching measure distributions."""

from .artifacts import TOOL_VERSION as __version__
from .errors import (
    DegenerateDistributionError,
    EmptyResultError,
    MangledWorldsError,
    NoCrossingError,
    NumericalError,
    QuadratureError,
    StabilityError,
    UsageError,
)
from .numerics import LogValue, log_add, log_binomial, log_sum

__all__ = [
    "__version__",
    "LogValue",
    "log_add",
    "log_binomial",
    "log_sum",
    "MangledWorldsError",
    "UsageError",
    "DegenerateDistributionError",
    "NumericalError",
    "QuadratureError",
    "StabilityError",
    "NoCrossingError",
    "EmptyResultError",
]
