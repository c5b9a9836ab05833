"""Exception hierarchy shared by all ranlase modules."""

from __future__ import annotations

import numpy as np


class RanlaseError(Exception):
    """Base class for every error raised by ranlase."""


class InvalidArgumentError(RanlaseError, ValueError):
    pass


class ConvergenceError(RanlaseError):
    """The nonlinear solver ran out of iterations.

    The best iterate found and its residual norm are attached so callers can
    retry with a different initialization or report a partial result.
    """

    def __init__(self, message: str, best=None, residual_norm: float = np.inf):
        super().__init__(message)
        self.best = best
        self.residual_norm = residual_norm


class UnboundedSolutionError(RanlaseError):
    """A mode with zero loss receives gain, so no stationary state exists."""


class StabilityError(RanlaseError):
    def __init__(self, message: str, eigenvalue: complex | None = None):
        super().__init__(message)
        self.eigenvalue = eigenvalue


class SingularityError(RanlaseError):
    pass


class DefectiveSpectrumError(RanlaseError):
    """Eigenvector basis too ill-conditioned for the eigen-expansion."""


class UndefinedFanoError(RanlaseError):
    """Fano factor requested for an empty mode or a zero current."""


class InfeasibleScaleError(RanlaseError):
    pass


class InsufficientDataError(RanlaseError):
    pass
