"""Semantic exception hierarchy shared across the package."""


class StqpError(Exception):
    """Base class for all package errors."""


class DomainError(StqpError, ValueError):
    """An argument is outside the mathematical domain of an operation."""


class UnsupportedFamilyError(StqpError, ValueError):
    """The distribution family does not support the requested operation."""


class DegenerateInstanceError(StqpError):
    """The instance violates a genericity assumption (e.g. tied diagonal)."""


class CostGuardError(StqpError):
    """A size limit protecting against runaway enumeration was exceeded."""


class NumericalFailureError(StqpError):
    """A numerical procedure failed to produce a usable result."""
