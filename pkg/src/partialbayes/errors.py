"""Exception hierarchy shared by the library, service and CLI."""


class PartialBayesError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(PartialBayesError, ValueError):
    """An argument lies outside the domain of a function."""


class ConfigurationError(PartialBayesError, ValueError):
    """Invalid configuration (empty grids, bad sizes, unknown tags)."""


class DataError(PartialBayesError, ValueError):
    """Malformed or unusable input data."""


class DegenerateDataError(DataError):
    """Data for which a statistic is undefined (e.g. zero spread)."""


class NumericError(PartialBayesError, ArithmeticError):
    """A numerical routine failed to converge."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})


class NoIntervalError(NumericError):
    """The plausibility at the search center is already below alpha."""


class DivergenceError(NumericError):
    """Bracket expansion did not find the boundary of the plausibility set."""
