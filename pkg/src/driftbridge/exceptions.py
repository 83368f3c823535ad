"""Exception types raised across the package."""


class DriftBridgeError(Exception):
    """Base class for all domain errors."""


class DimensionMismatchError(DriftBridgeError, ValueError):
    pass


class NotPositiveDefiniteError(DriftBridgeError, ValueError):
    pass


class InfeasibleProblemError(DriftBridgeError, ValueError):
    """Marginals of a transport problem do not carry equal mass."""


class SolverError(DriftBridgeError, RuntimeError):
    pass


class ConvergenceError(DriftBridgeError, RuntimeError):
    """Iteration budget exhausted; ``best`` holds the best iterate found."""

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class ZeroVarianceError(DriftBridgeError, ValueError):
    """Null samples are constant; no parametric fit exists."""


class InvalidParameterError(DriftBridgeError, ValueError):
    pass
