"""Exception types raised across the package."""


class ConvexError(Exception):
    """Base class for all package errors."""


class DomainError(ConvexError, ValueError):
    """An argument lies outside the domain where the quantity is defined."""


class ShapeError(ConvexError, ValueError):
    """Input data has the wrong shape, ordering or size."""


class IntegrationError(ConvexError, RuntimeError):
    """Adaptive quadrature failed to reach the requested tolerance."""


class ToleranceError(ConvexError, RuntimeError):
    """A constructed object violates its numerical tolerance contract."""


class MissingPointError(ConvexError, KeyError):
    """A required design point has no measurements."""


class ConvergenceError(ConvexError, RuntimeError):
    """An iterative solver hit its iteration cap before converging."""


class StateError(ConvexError, LookupError):
    """A sampler state was queried about something it does not track."""


class OracleError(ConvexError, RuntimeError):
    """The measurement oracle failed to return an observation."""


class BudgetExhausted(ConvexError, RuntimeError):
    """A sampler ran out of queries before certifying its target.

    The partial result is attached so callers can still use it.
    """

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result
