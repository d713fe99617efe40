"""Exception types shared across the package."""


class DriftbenchError(Exception):
    pass


class InvalidInputError(DriftbenchError, ValueError):
    pass


class DomainError(DriftbenchError, ValueError):
    """Point outside the domain where a regularizer (or its gradient) is defined."""


class DegenerateBodyError(DriftbenchError, ValueError):
    pass


class NumericError(DriftbenchError, ArithmeticError):
    """An iterative routine failed to reach its tolerance."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class StepError(DriftbenchError):
    """Failure inside an OMD run; carries the step index and the partial trace."""

    def __init__(self, message, t, partial=None):
        super().__init__(f"step {t}: {message}")
        self.t = t
        self.partial = partial


class ConfigError(DriftbenchError, ValueError):
    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field
