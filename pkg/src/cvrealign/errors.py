"""Exception and warning types raised across the package."""


class CVRealignError(Exception):
    """Base class for all errors raised by cvrealign."""


class SingularMatrix(CVRealignError, ArithmeticError):
    """A matrix that must be inverted has a (numerically) zero eigenvalue."""

    def __init__(self, message, eigenvalue=None):
        super().__init__(message)
        self.eigenvalue = eigenvalue


class DegenerateState(CVRealignError, ArithmeticError):
    """The realigned covariance matrix is degenerate (zero determinant)."""


class DomainError(CVRealignError, ValueError):
    """An input lies outside the domain a formula is defined on."""


class OverflowGuard(CVRealignError, OverflowError):
    """A derivative order exceeds the combinatorial guard."""


class CapacityExceeded(CVRealignError, MemoryError):
    """A coefficient tensor would exceed the configured size limit."""


class CutoffTooSmall(CVRealignError, ValueError):
    """The Fock cutoff is too small for the requested operation."""


class NonMonotonicWarning(UserWarning):
    """A criterion crosses its threshold more than once along a scan."""
