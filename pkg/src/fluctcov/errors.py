"""Exception hierarchy shared by all stages.

The CLI maps each class to a distinct exit code, so raise the most
specific one that applies.
"""


class FluctcovError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(FluctcovError, ValueError):
    """An argument lies outside the domain of the operation."""


class StabilityError(FluctcovError):
    """An operator that must be stable (negative definite) is not."""


class SolverError(FluctcovError):
    """A numerical procedure failed to converge or broke down."""
