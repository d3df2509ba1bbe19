"""Exception types shared across the package."""


class NetlabError(Exception):
    """Base class for all package errors."""


class DomainError(NetlabError):
    """An argument fell outside the domain of a modulus or construction."""


class RangeError(NetlabError):
    """A value fell outside the range of an invertible function."""


class InjectivityError(NetlabError):
    """A mapping required to be injective has duplicate image points."""


class ConfigurationError(NetlabError):
    """Inconsistent or inadmissible construction parameters."""


class BudgetError(NetlabError):
    """A combinatorial or sampling budget was exceeded."""


class UnterminatedError(NetlabError):
    """An iteration-count certificate was not found within the level cap.

    Carries the partial trace so callers can inspect how far the search got.
    """

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace


class ReliabilityError(NetlabError):
    """A numerical procedure failed on too large a fraction of samples."""


class PropertyViolation(NetlabError):
    """A constructed object failed one of its defining invariants."""
