"""Marginal quantile residual lifetime regression for clustered, right-censored
failure times."""

from .data import ClusteredDataset, Observation, QrlSpec, load_dataset, save_dataset, validate_for_fit
from .errors import DataValidationError, QrlError, RiskSetError, SolverError, VarianceError
from .estimator import (
    FitResult,
    evaluate_score,
    fit_qrl,
    fit_quantile_grid,
    predict_residual_quantile,
    rearrange_quantiles,
)
from .inference import coefficient_cis, wald_test
from .solver import WqrProblem, WqrSolution, solve_weighted_qr
from .survival import KmCurve, fit_censoring_survival
from .variance import (
    CovarianceEstimate,
    bandwidth_hall,
    variance_cfs,
    variance_fr,
    variance_ifr,
    variance_rbs,
)

__version__ = "0.1.0"

__all__ = [
    "ClusteredDataset",
    "CovarianceEstimate",
    "DataValidationError",
    "FitResult",
    "KmCurve",
    "Observation",
    "QrlError",
    "QrlSpec",
    "RiskSetError",
    "SolverError",
    "VarianceError",
    "WqrProblem",
    "WqrSolution",
    "bandwidth_hall",
    "coefficient_cis",
    "evaluate_score",
    "fit_censoring_survival",
    "fit_qrl",
    "fit_quantile_grid",
    "load_dataset",
    "predict_residual_quantile",
    "rearrange_quantiles",
    "save_dataset",
    "solve_weighted_qr",
    "validate_for_fit",
    "variance_cfs",
    "variance_fr",
    "variance_ifr",
    "variance_rbs",
    "wald_test",
]
