"""Exception types shared across the package."""


class InputError(ValueError):
    """Argument outside the documented domain."""


class DimensionError(ValueError):
    """Mismatched tensor extents."""


class ConvergenceError(RuntimeError):
    """Iterative solver stopped before reaching its tolerance.

    The best iterate is kept on the exception so callers can decide
    whether it is good enough.
    """

    def __init__(self, message, residual=float("nan"), energy=None, vector=None):
        super().__init__(message)
        self.residual = residual
        self.energy = energy
        self.vector = vector


class FitError(RuntimeError):
    """A least-squares fit could not be carried out or is ill-posed."""
