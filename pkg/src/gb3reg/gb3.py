"""The GB3 (Libby-Novick beta) distribution.

Two parameterizations are supported:

* classical ``Gb3Params(lam, alpha, beta)`` with CDF
  ``F(y) = I_{lam*y / (1 + lam*y - y)}(alpha, beta)``;
* quantile-based ``QuantileGb3Params(mu, alpha, beta, tau)`` where ``mu`` is
  the ``tau``-quantile and ``lam`` is recovered from
  ``lam = (1 - mu)/mu * z/(1 - z)``, ``z`` being the ``tau``-quantile of
  Beta(alpha, beta).

Densities are evaluated in log space.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import specfun
from .specfun import DomainError, Tolerance, _inv_pair

__all__ = [
    "Gb3Params",
    "QuantileGb3Params",
    "beta_quantile",
    "gb3_logpdf",
    "gb3_pdf",
    "gb3_cdf",
    "gb3_quantile",
    "gb3_sample",
    "gb3_rvs",
    "lambda_from_quantile",
    "qgb3_pdf",
    "qgb3_cdf",
    "qgb3_quantile",
    "gb1_pdf",
    "gb3_to_gb1",
]

# Inner inversions run to machine precision so that finite differences
# taken through them stay clean.
INNER_TOL = Tolerance(abs_tol=1e-12, rel_tol=1e-15, max_iter=200)


def _positive(name, value):
    if not (math.isfinite(value) and value > 0):
        raise DomainError(f"{name} must be finite and > 0, got {value!r}")


def _unit(name, value):
    if not (math.isfinite(value) and 0 < value < 1):
        raise DomainError(f"{name} must lie in (0, 1), got {value!r}")


@dataclass(frozen=True)
class Gb3Params:
    lam: float
    alpha: float
    beta: float

    def __post_init__(self):
        _positive("lam", self.lam)
        _positive("alpha", self.alpha)
        _positive("beta", self.beta)

    def complement(self) -> "Gb3Params":
        """Parameters of 1 - Y."""
        return Gb3Params(1.0 / self.lam, self.beta, self.alpha)


@dataclass(frozen=True)
class QuantileGb3Params:
    mu: float
    alpha: float
    beta: float
    tau: float

    def __post_init__(self):
        _unit("mu", self.mu)
        _positive("alpha", self.alpha)
        _positive("beta", self.beta)
        _unit("tau", self.tau)

    def to_classical(self) -> Gb3Params:
        return Gb3Params(lambda_from_quantile(self), self.alpha, self.beta)


@lru_cache(maxsize=4096)
def _beta_quantile_pair(tau: float, alpha: float, beta: float) -> tuple[float, float]:
    z, zc = _inv_pair(tau, alpha, beta, -1.0, INNER_TOL.abs_tol, INNER_TOL.rel_tol,
                      INNER_TOL.max_iter)
    if math.isnan(z):
        raise specfun.ConvergenceError(
            f"beta quantile did not converge for tau={tau}, alpha={alpha}, beta={beta}"
        )
    return z, zc


def beta_quantile(tau: float, alpha: float, beta: float) -> float:
    """z_{alpha,beta}(tau), cached per (tau, alpha, beta)."""
    _unit("tau", tau)
    _positive("alpha", alpha)
    _positive("beta", beta)
    return _beta_quantile_pair(float(tau), float(alpha), float(beta))[0]


def _out(v):
    return float(v) if np.ndim(v) == 0 else v


def gb3_logpdf(y, p: Gb3Params):
    y = np.asarray(y, dtype=float)
    if np.any(~((y > 0) & (y < 1))):
        raise DomainError("the GB3 density is defined on the open interval (0, 1)")
    a, b, lam = p.alpha, p.beta, p.lam
    ly = np.log(y)
    l1y = np.log1p(-y)
    # (b-1) log(1-y) - (a+b) log(1-y+lam y), rearranged to avoid O(b) cancellation
    r = math.log(lam) + ly - l1y
    out = (
        a * math.log(lam)
        + (a - 1.0) * ly
        - (a + 1.0) * l1y
        - specfun.log_beta(a, b)
        - (a + b) * np.logaddexp(0.0, r)
    )
    return _out(out)


def gb3_pdf(y, p: Gb3Params):
    """Density lam^a y^(a-1) (1-y)^(b-1) / (B(a,b) [1-(1-lam)y]^(a+b))."""
    return _out(np.exp(gb3_logpdf(y, p)))


def gb3_cdf(y, p: Gb3Params):
    y = np.asarray(y, dtype=float)
    if np.any(~((y >= 0) & (y <= 1))):
        raise DomainError("y must lie in [0, 1]")
    denom = (1.0 - y) + p.lam * y
    arg = p.lam * y / denom
    carg = (1.0 - y) / denom
    lower = arg <= 0.5
    out = np.where(
        lower,
        specfun.inc_beta_ratio(np.where(lower, arg, 0.0), p.alpha, p.beta),
        1.0 - np.asarray(specfun.inc_beta_ratio(np.where(lower, 0.0, carg), p.beta, p.alpha)),
    )
    return _out(out)


def gb3_quantile(tau, p: Gb3Params):
    """q = z / (lam (1 - z) + z) with z the Beta(alpha, beta) tau-quantile."""
    tau = np.asarray(tau, dtype=float)
    if np.any(~((tau > 0) & (tau < 1))):
        raise DomainError("tau must lie in (0, 1)")
    pairs = [_beta_quantile_pair(float(t), p.alpha, p.beta) for t in tau.ravel()]
    z = np.array([zz for zz, _ in pairs]).reshape(tau.shape)
    zc = np.array([cc for _, cc in pairs]).reshape(tau.shape)
    return _out(z / (p.lam * zc + z))


def lambda_from_quantile(qp: QuantileGb3Params) -> float:
    z, zc = _beta_quantile_pair(qp.tau, qp.alpha, qp.beta)
    return (1.0 - qp.mu) / qp.mu * (z / zc)


def qgb3_pdf(y, qp: QuantileGb3Params):
    return gb3_pdf(y, qp.to_classical())


def qgb3_logpdf(y, qp: QuantileGb3Params):
    return gb3_logpdf(y, qp.to_classical())


def qgb3_cdf(y, qp: QuantileGb3Params):
    return gb3_cdf(y, qp.to_classical())


def qgb3_quantile(tau, qp: QuantileGb3Params):
    return gb3_quantile(tau, qp.to_classical())


def gb3_rvs(lam, alpha, beta, rng: np.random.Generator, size=None):
    """Vectorized draws X1/(X1 + X2).

    X1 ~ Gamma(alpha) with rate lam and X2 ~ Gamma(beta) with rate 1, so the
    rate ratio is lam (latent means alpha/lam and beta).
    """
    lam, alpha, beta = (np.asarray(v, dtype=float) for v in (lam, alpha, beta))
    if size is None:
        size = np.broadcast(lam, alpha, beta).shape
    x1 = np.asarray(specfun.sample_gamma(np.broadcast_to(alpha, size), 1.0, rng))
    x2 = np.asarray(specfun.sample_gamma(np.broadcast_to(beta, size), 1.0, rng))
    x1 = x1 / np.broadcast_to(lam, size)
    return _out(x1 / (x1 + x2))


def gb3_sample(p: Gb3Params, rng: np.random.Generator, size=None):
    return gb3_rvs(p.lam, p.alpha, p.beta, rng, size=size)


def gb1_pdf(y, mu, sigma, nu, tau_power):
    """Four-parameter generalized beta of the first kind (gamlss form)."""
    y = np.asarray(y, dtype=float)
    if np.any(~((y > 0) & (y < 1))):
        raise DomainError("y must lie in (0, 1)")
    s2 = sigma * sigma
    a = mu * (1.0 - s2) / s2
    b = (1.0 - mu) * (1.0 - s2) / s2
    yt = y ** tau_power
    logf = (
        math.log(tau_power)
        + b * math.log(nu)
        + (tau_power * a - 1.0) * np.log(y)
        + (b - 1.0) * np.log1p(-yt)
        - specfun.log_beta(a, b)
        - (a + b) * np.log(nu + (1.0 - nu) * yt)
    )
    return _out(np.exp(logf))


def gb3_to_gb1(p: Gb3Params) -> tuple[float, float, float, float]:
    """GB1 (mu, sigma, nu, tau) arguments reproducing GB3(lam, alpha, beta).

    sigma is (alpha + beta + 1)^(-1/2); with the GB1 shape convention
    alpha = mu (1 - sigma^2) / sigma^2 this is the value returning the GB3
    shapes unchanged.
    """
    s = p.alpha + p.beta
    return p.alpha / s, (s + 1.0) ** -0.5, 1.0 / p.lam, 1.0
