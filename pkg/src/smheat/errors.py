"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Malformed or invalid run configuration."""


class AssumptionError(ConfigError):
    """A catalog function or measure violates one of the standing assumptions A1-A7."""

    def __init__(self, assumption: str, detail: str):
        self.assumption = assumption
        super().__init__(f"{assumption} violated: {detail}")


class ConvergenceError(RuntimeError):
    """Picard iteration did not reach the requested tolerance."""

    def __init__(self, message: str, residuals=()):
        super().__init__(message)
        self.residuals = list(residuals)


class FlatPathError(ValueError):
    """Hölder estimation on a path with vanishing increments."""
