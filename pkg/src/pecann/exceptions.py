"""Exception types shared across the package."""

__all__ = [
    "ConfigurationError",
    "EvaluationError",
    "TrainingAborted",
    "NonDescentDirectionError",
]


class ConfigurationError(ValueError):
    """Invalid static configuration (sizes, tolerances, option values)."""


class EvaluationError(RuntimeError):
    """A numerical evaluation produced non-finite values or invalid input."""


class TrainingAborted(EvaluationError):
    """Training stopped because an objective or constraint went non-finite.

    Carries enough context (epoch, offending term, strategy) to diagnose
    which part of the run diverged.
    """

    def __init__(self, epoch, term, strategy):
        self.epoch = epoch
        self.term = term
        self.strategy = strategy
        super().__init__(
            f"non-finite value in term '{term}' at epoch {epoch} "
            f"(strategy {strategy})"
        )


class NonDescentDirectionError(ValueError):
    """A line search was started along a non-descent direction."""
