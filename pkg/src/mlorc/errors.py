class ShapeError(ValueError):
    """Raised when matrix dimensions do not agree."""


class NonFiniteError(ValueError):
    """Raised when a NaN or Inf reaches an operation."""


class DomainError(ValueError):
    """Raised when an input is outside the domain of a metric."""


class ConfigError(ValueError):
    """Raised for invalid experiment or optimizer configuration.

    ``field`` names the offending (dotted) config key when known.
    """

    def __init__(self, message, field=None):
        self.field = field
        if field is not None:
            message = f"{field}: {message}"
        super().__init__(message)


class DivergenceError(RuntimeError):
    """Raised when a run produces a non-finite loss."""

    def __init__(self, step, message=None):
        self.step = step
        super().__init__(message or f"non-finite loss at step {step}")
