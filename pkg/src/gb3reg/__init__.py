"""Quantile regression for unit-interval responses with the GB3 distribution."""

__version__ = "0.1.0"

from .gb3 import (
    Gb3Params,
    QuantileGb3Params,
    beta_quantile,
    gb3_cdf,
    gb3_logpdf,
    gb3_pdf,
    gb3_quantile,
    gb3_sample,
    gb3_to_gb1,
    gb1_pdf,
    lambda_from_quantile,
    qgb3_cdf,
    qgb3_pdf,
    qgb3_quantile,
)
from .links import LinkFunction, get_link, taylor_slope
from .regression import (
    Coefficients,
    Dataset,
    FitResult,
    ModelSpec,
    fit,
    log_likelihood,
    observed_information,
    score,
    wald_inference,
)
from .specfun import ConvergenceError, DomainError, Tolerance

__all__ = [
    "__version__",
    "Gb3Params",
    "QuantileGb3Params",
    "beta_quantile",
    "gb3_cdf",
    "gb3_logpdf",
    "gb3_pdf",
    "gb3_quantile",
    "gb3_sample",
    "gb3_to_gb1",
    "gb1_pdf",
    "lambda_from_quantile",
    "qgb3_cdf",
    "qgb3_pdf",
    "qgb3_quantile",
    "LinkFunction",
    "get_link",
    "taylor_slope",
    "Coefficients",
    "Dataset",
    "FitResult",
    "ModelSpec",
    "fit",
    "log_likelihood",
    "observed_information",
    "score",
    "wald_inference",
    "ConvergenceError",
    "DomainError",
    "Tolerance",
]
