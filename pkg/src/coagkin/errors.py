"""Exception types shared across the package."""


class CoagkinError(Exception):
    """Base class for package errors."""


class ConfigError(CoagkinError):
    """Invalid configuration; carries the offending field name."""

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"config field '{field}': {message}")


class NumericError(CoagkinError):
    """Non-finite values encountered during evaluation or integration."""

    def __init__(self, message: str, time: float | None = None):
        self.time = time
        if time is not None:
            message = f"{message} (at t={time:.6g})"
        super().__init__(message)


class IntegrationStalledError(NumericError):
    """Step size underflowed; carries the last accepted state."""

    def __init__(self, message: str, time: float, last_state=None):
        self.last_state = last_state
        super().__init__(message, time=time)
