"""Shared exception types."""


class ShapeError(ValueError):
    """Block shapes are inconsistent with the graded dimensions."""


class AcyclicityError(ValueError):
    """A nilpotent map fails to be acyclic where acyclicity is required."""


class RegularityError(ValueError):
    """A restricted characteristic operator is singular or ill-defined."""


class MetricError(ValueError):
    """A Gram family is not Hermitian positive definite."""


class AbscissaError(ValueError):
    """Evaluation requested below the convergence abscissa of an orbit sum."""

    def __init__(self, message, required_re_lambda=None):
        super().__init__(message)
        self.required_re_lambda = required_re_lambda


class ConvergenceError(RuntimeError):
    """An iterative limit failed to settle; carries the last two iterates."""

    def __init__(self, message, iterates=()):
        super().__init__(message)
        self.iterates = tuple(iterates)
