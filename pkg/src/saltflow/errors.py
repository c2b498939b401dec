"""Exception types shared across the package."""


class ConfigError(ValueError):
    """A configuration value is missing, malformed, or inconsistent."""


class InvalidRealizationError(ValueError):
    """A random-field realization produced an unphysical coefficient.

    Carries the flat index of the first offending vertex so callers can
    report or resample.
    """

    def __init__(self, message, vertex=None, value=None):
        super().__init__(message)
        self.vertex = vertex
        self.value = value


class KrylovError(RuntimeError):
    """Linear solver failed (breakdown after restart, or max_iter hit).

    ``x`` holds the best iterate reached, ``residuals`` the history of
    relative residual norms.
    """

    def __init__(self, message, x=None, residuals=None):
        super().__init__(message)
        self.x = x
        self.residuals = residuals if residuals is not None else []


class NewtonError(RuntimeError):
    """Newton iteration failed to converge.

    ``report`` carries the residual-norm history accumulated so far.
    """

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report
