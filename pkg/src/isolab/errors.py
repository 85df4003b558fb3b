"""Exception types shared across the package."""


class IsolabError(Exception):
    """Base class for all package errors."""


class ValidationError(IsolabError, ValueError):
    """A configuration or input violates a documented invariant."""


class ShapeError(ValidationError):
    """Matrix or vector dimensions do not agree."""


class NumericalError(IsolabError, ArithmeticError):
    """A numerical routine failed on otherwise valid input."""


class ConvergenceError(NumericalError):
    """An iterative method hit its iteration cap.

    ``best`` holds the last estimate reached before giving up.
    """

    def __init__(self, message: str, best: float):
        super().__init__(message)
        self.best = best


class SingularityError(NumericalError):
    """A linear system that must be solved is singular."""


class DegenerateMatrixError(NumericalError):
    """A scaling rule would divide by a (numerically) zero quantity."""
