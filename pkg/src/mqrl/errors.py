"""Exception hierarchy shared across the package."""

from __future__ import annotations


class QrlError(Exception):
    """Base class for all errors raised by mqrl."""


class DataValidationError(QrlError, ValueError):
    """Input data violates a structural or value constraint."""


class RiskSetError(QrlError, ValueError):
    """The risk set at ``t0`` is empty or too small to identify the model."""


class SolverError(QrlError, RuntimeError):
    """The weighted quantile-regression solver failed.

    Attributes
    ----------
    last_iterate : ndarray or None
        Coefficient vector at the final iteration.
    gap : float
        Duality gap at the final iteration.
    """

    def __init__(self, message, last_iterate=None, gap=float("nan")):
        super().__init__(message)
        self.last_iterate = last_iterate
        self.gap = gap


class VarianceError(QrlError, RuntimeError):
    """A covariance estimator could not be computed."""
