"""Partial Bayes interval estimation with inferential-model plausibility functions."""

from .errors import (
    ConfigurationError,
    DataError,
    DegenerateDataError,
    DivergenceError,
    DomainError,
    NoIntervalError,
    NumericError,
    PartialBayesError,
)
from .im import IntervalEstimate, PlausibilityCurve
from .rng import RandomStream

__version__ = "0.1.0"

__all__ = [
    "ConfigurationError",
    "DataError",
    "DegenerateDataError",
    "DivergenceError",
    "DomainError",
    "IntervalEstimate",
    "NoIntervalError",
    "NumericError",
    "PartialBayesError",
    "PlausibilityCurve",
    "RandomStream",
]
