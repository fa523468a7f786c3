"""Exception types shared across the package."""


class DimensionError(ValueError):
    """An operator, state, or truncation has an unusable dimension."""


class ConfigError(ValueError):
    """A configuration file failed validation.

    Carries the offending field path so the CLI can report it and exit
    with the configuration error code.
    """

    def __init__(self, field, message):
        self.field = field
        self.message = message
        super().__init__(f"{field}: {message}")


class NumericalFailure(RuntimeError):
    """An integrator produced non-finite values or left its validity window.

    ``t`` is the simulation time at which the failure was detected, when
    known.
    """

    def __init__(self, message, t=None):
        self.t = t
        if t is not None:
            message = f"{message} (at t={t:.6g})"
        super().__init__(message)
