"""Exception types shared across the package."""


class GrowFragError(Exception):
    """Base class for package errors."""


class StabilityError(GrowFragError):
    """The explicit fragmentation update would be unstable for this rate."""


class BlowupError(GrowFragError):
    """A simulation produced non-finite values."""

    def __init__(self, step: int, message: str | None = None):
        self.step = step
        super().__init__(message or f"non-finite state at step {step}")


class ConvergenceError(GrowFragError):
    """An iterative solver did not reach its tolerance."""


class ConfigError(GrowFragError):
    """A run configuration is invalid or violates the stability certificate."""
