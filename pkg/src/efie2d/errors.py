"""Exception hierarchy shared by all modules."""

from __future__ import annotations


class Efie2DError(Exception):
    """Base class for library errors."""


class InvalidArgument(Efie2DError, ValueError):
    pass


class Unsupported(Efie2DError, ValueError):
    pass


class NumericDomainError(Efie2DError, ArithmeticError):
    """A function was evaluated where it is not finite."""


class SingularityError(NumericDomainError):
    """Kernel evaluated at coincident points."""


class NumericError(Efie2DError, ArithmeticError):
    """A dense factorization or eigen/SVD solver failed."""


class SingularSystemError(NumericError):
    pass


class AccuracyFailure(Efie2DError, ArithmeticError):
    """Adaptive procedure did not reach its tolerance.

    The best available estimate is attached as ``best_estimate``.
    """

    def __init__(self, message: str, best_estimate: float = float("nan"), error: float = float("nan")):
        super().__init__(message)
        self.best_estimate = best_estimate
        self.error = error
