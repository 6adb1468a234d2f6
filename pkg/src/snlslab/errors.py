class SnlsLabError(Exception):
    pass


class ConfigError(SnlsLabError, ValueError):
    """Invalid configuration or parameters."""


class LatticeMismatchError(SnlsLabError, ValueError):
    pass


class NumericalAbort(SnlsLabError, RuntimeError):
    """A solve produced a non-finite value or crossed the blow-up threshold."""

    def __init__(self, message: str, step: int | None = None, time: float | None = None):
        super().__init__(message)
        self.step = step
        self.time = time
