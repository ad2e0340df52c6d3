"""Exception types shared across the package."""


class InputError(ValueError):
    """Malformed or inconsistent input (dimension mismatch, bad weights, ...)."""


class UnsupportedError(NotImplementedError):
    """Operation not available for this kind of input."""


class StructuralError(ValueError):
    """A structural hypothesis of a certificate check does not hold."""


class SolverError(RuntimeError):
    """Internal failure of the transport solver."""


class ConvergenceError(RuntimeError):
    """Root finder failed to converge.

    ``trace`` holds one ``(prices, residuals)`` pair per iteration so callers
    can see where it stalled.
    """

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = list(trace or [])
