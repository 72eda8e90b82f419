"""Residuals, information criteria, prediction errors and effect sizes."""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .links import get_link, taylor_slope
from .regression import INTERCEPT, Dataset, FitResult, fitted_parameters
from .specfun import DomainError, inc_beta_ratio, normal_quantile

__all__ = [
    "ResidualReport",
    "rq_residuals",
    "gb3_cdf_rows",
    "information_criteria",
    "criteria",
    "prediction_errors",
    "pct_change_exact",
    "pct_change_approx",
    "latent_mean_change",
    "log_multiplier_delta",
    "qq_positions",
    "table_rows",
]

CDF_CLAMP = 1e-10


@dataclass(frozen=True, eq=False)
class ResidualReport:
    residuals: np.ndarray
    theoretical_quantiles: np.ndarray
    sample_quantiles: np.ndarray
    n_clamped: int = 0

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            self.write_csv(fh)

    def write_csv(self, fh) -> None:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["index", "residual", "theoretical", "sample"])
        for i, (r, t, s) in enumerate(
            zip(self.residuals, self.theoretical_quantiles, self.sample_quantiles)
        ):
            w.writerow([i, repr(float(r)), repr(float(t)), repr(float(s))])


def gb3_cdf_rows(y, lam, alpha, beta) -> np.ndarray:
    """Row-wise GB3 CDF for parameter vectors."""
    y, lam, alpha, beta = np.broadcast_arrays(*(np.asarray(v, float) for v in (y, lam, alpha, beta)))
    denom = (1.0 - y) + lam * y
    arg = lam * y / denom
    carg = (1.0 - y) / denom
    lower = arg <= 0.5
    lo = np.asarray(inc_beta_ratio(np.where(lower, arg, 0.0), alpha, beta))
    hi = np.asarray(inc_beta_ratio(np.where(lower, 0.0, carg), beta, alpha))
    return np.where(lower, lo, 1.0 - hi)


def qq_positions(n: int) -> np.ndarray:
    return normal_quantile((np.arange(1, n + 1) - 0.5) / n)


def rq_residuals(fr: FitResult, data: Dataset) -> ResidualReport:
    """Quantile residuals Phi^{-1}(F(y_i; mu_i, alpha_i, beta_i)).

    The response is continuous, so no randomization is needed.  CDF values
    are clamped to [1e-10, 1 - 1e-10] before inversion and the number of
    clamped rows is reported.
    """
    if not fr.converged:
        warnings.warn("computing residuals for a fit that did not converge", RuntimeWarning)
    mu, alpha, beta, lam = fitted_parameters(fr, data)
    u = gb3_cdf_rows(data.y, lam, alpha, beta)
    clamped = int(np.sum((u < CDF_CLAMP) | (u > 1 - CDF_CLAMP)))
    u = np.clip(u, CDF_CLAMP, 1 - CDF_CLAMP)
    r = np.asarray(normal_quantile(u), dtype=float).reshape(-1)
    return ResidualReport(r, qq_positions(r.size), np.sort(r), clamped)


def criteria(loglik: float, n_params: int, n_obs: int) -> tuple[float, float]:
    return -2.0 * loglik + 2.0 * n_params, -2.0 * loglik + n_params * math.log(n_obs)


def information_criteria(fr: FitResult) -> tuple[float, float]:
    """(AIC, BIC) of a fit."""
    return criteria(fr.loglik, fr.n_params, fr.n_obs)


def prediction_errors(true_mu, est_mu) -> tuple[float, float]:
    """Mean squared and mean absolute differences between true and fitted quantiles."""
    t = np.asarray(true_mu, dtype=float)
    e = np.asarray(est_mu, dtype=float)
    if t.shape != e.shape or t.size == 0:
        raise DomainError("true and estimated quantiles must be non-empty and equally shaped")
    d = t - e
    return float(np.mean(d * d)), float(np.mean(np.abs(d)))


def _mu_row(fr: FitResult, row) -> np.ndarray:
    terms = fr.spec.terms("mu")
    if isinstance(row, Mapping):
        return np.array([1.0 if t == INTERCEPT else float(row[t]) for t in terms])
    x = np.asarray(row, dtype=float).ravel()
    if x.size == len(terms) - int(fr.spec.mu_intercept) and fr.spec.mu_intercept:
        x = np.concatenate([[1.0], x])
    if x.size != len(terms):
        raise DomainError(f"covariate row needs {len(terms)} entries for terms {terms}")
    return x


def pct_change_exact(fr: FitResult, row, term, delta: float = 1.0) -> float:
    """Exact percentage change of the fitted quantile when ``term`` moves by ``delta``.

    ``row`` is a mapping from term names to values, or a vector aligned with
    the quantile predictor's columns (the intercept may be omitted).
    ``term`` is a name or a column index.
    """
    terms = fr.spec.terms("mu")
    j = terms.index(term) if isinstance(term, str) else int(term)
    theta = fr.coefficients.theta
    lin = float(_mu_row(fr, row) @ theta)
    g = fr.spec.mu_link
    base = float(g.inverse(lin))
    moved = float(g.inverse(lin + theta[j] * delta))
    return 100.0 * (moved - base) / base


def pct_change_approx(theta_j: float, link="logit", convention: str = "negexp") -> float:
    """First-order percentage change of the quantile for a unit covariate step.

    ``convention="negexp"`` returns 100 (exp(-a1 theta_j) - 1), the commonly
    quoted shortcut.  ``convention="taylor"`` returns
    100 (exp(a1 theta_j) - 1), the value obtained by exponentiating the
    expansion log g^{-1}(eta) ~ a0 + a1 eta; only this one tracks
    ``pct_change_exact`` in sign.
    """
    a1 = taylor_slope(get_link(link))
    if convention == "negexp":
        return 100.0 * math.expm1(-a1 * theta_j)
    if convention == "taylor":
        return 100.0 * math.expm1(a1 * theta_j)
    raise DomainError(f"unknown convention {convention!r}")


def latent_mean_change(coef: float) -> float:
    """Percentage change of a latent gamma mean per unit step of a shape covariate."""
    return 100.0 * math.expm1(coef)


def log_multiplier_delta(c: float) -> float:
    """Step on a log-scale covariate equivalent to multiplying the raw value by c."""
    if not c > 0:
        raise DomainError("multiplier must be positive")
    return math.log(c)


def table_rows(fr: FitResult, levels: Sequence[float] = (0.90, 0.95, 0.99)) -> list[dict]:
    """Coefficient table with Wald intervals at several levels."""
    from .regression import wald_inference

    base = wald_inference(fr, levels[0])
    out = []
    for i, row in enumerate(base):
        rec = {
            "component": row.component,
            "term": row.term,
            "estimate": row.estimate,
            "se": row.se,
            "z": row.z,
            "p_value": row.p_value,
        }
        out.append(rec)
    for level in levels:
        for rec, row in zip(out, wald_inference(fr, level)):
            rec[f"ci{int(round(level * 100))}"] = [row.ci_low, row.ci_high]
    return out
