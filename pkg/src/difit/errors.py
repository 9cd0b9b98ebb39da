from .distributions import ParameterError

__all__ = ["ConvergenceError", "EstimationError", "ParameterError"]


class EstimationError(RuntimeError):
    """An estimator could not produce a valid estimate for this sample."""


class ConvergenceError(EstimationError):
    """Iteration cap reached; ``last`` holds the final iterate."""

    def __init__(self, message, last=None, iterations=None):
        super().__init__(message)
        self.last = last
        self.iterations = iterations
