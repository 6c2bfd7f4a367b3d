"""Exception types raised across the package."""


class ZeroQueueError(Exception):
    """Base class for all package errors."""


class AlgebraError(ZeroQueueError, ValueError):
    """Invalid generator alphabet, product table or word."""


class SolverError(ZeroQueueError, RuntimeError):
    """A fixed-point or linear solve failed or produced an inconsistent result."""


class RegimeError(ZeroQueueError):
    """The requested quantity does not exist in the model's stability regime."""
