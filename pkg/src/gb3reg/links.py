"""Link functions for the quantile and shape predictors.

Conventions:

* logit    eta = log(mu / (1 - mu))
* probit   eta = Phi^{-1}(mu)
* loglog   mu = exp(-exp(-eta))
* cloglog  mu = 1 - exp(-exp(eta))
* log      eta = log(v), v > 0

Inverses of the unit-interval links are clamped to [1e-12, 1 - 1e-12].
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .specfun import DomainError, normal_cdf, normal_pdf, normal_quantile

__all__ = [
    "LinkFunction",
    "get_link",
    "UNIT_LINKS",
    "LINK_NAMES",
    "taylor_slope",
    "taylor_intercept",
    "link_apply",
    "link_inverse",
    "link_inv_derivative",
]

CLAMP = 1e-12
UNIT_LINKS = ("logit", "probit", "loglog", "cloglog")
LINK_NAMES = UNIT_LINKS + ("log",)
# integer codes used by compiled kernels
LINK_CODES = {name: i for i, name in enumerate(LINK_NAMES)}


def _out(v):
    return float(v) if np.ndim(v) == 0 else v


@dataclass(frozen=True)
class LinkFunction:
    kind: str

    def __post_init__(self):
        if self.kind not in LINK_NAMES:
            raise DomainError(f"unknown link {self.kind!r}; expected one of {LINK_NAMES}")

    @property
    def code(self) -> int:
        return LINK_CODES[self.kind]

    @property
    def is_unit(self) -> bool:
        return self.kind in UNIT_LINKS

    def __str__(self):
        return self.kind

    def apply(self, v):
        """g(v)."""
        v = np.asarray(v, dtype=float)
        if self.is_unit:
            if np.any(~((v > 0) & (v < 1))):
                raise DomainError(f"{self.kind} link needs values in (0, 1)")
        elif np.any(~(v > 0)) or np.any(~np.isfinite(v)):
            raise DomainError("log link needs values in (0, inf)")
        k = self.kind
        if k == "logit":
            out = np.log(v) - np.log1p(-v)
        elif k == "probit":
            out = normal_quantile(v)
        elif k == "loglog":
            out = -np.log(-np.log(v))
        elif k == "cloglog":
            out = np.log(-np.log1p(-v))
        else:
            out = np.log(v)
        return _out(out)

    def inverse(self, eta):
        """g^{-1}(eta)."""
        eta = np.asarray(eta, dtype=float)
        k = self.kind
        if k == "log":
            return _out(np.exp(eta))
        with np.errstate(over="ignore", under="ignore"):
            if k == "logit":
                out = 0.5 * (1.0 + np.tanh(0.5 * eta))
            elif k == "probit":
                out = normal_cdf(eta)
            elif k == "loglog":
                out = np.exp(-np.exp(-eta))
            else:
                out = -np.expm1(-np.exp(eta))
        return _out(np.clip(out, CLAMP, 1.0 - CLAMP))

    def inv_derivative(self, eta):
        """d g^{-1}(eta) / d eta (unclamped closed form)."""
        eta = np.asarray(eta, dtype=float)
        k = self.kind
        with np.errstate(over="ignore", under="ignore", invalid="ignore"):
            if k == "log":
                out = np.exp(eta)
            elif k == "logit":
                e = np.exp(-np.abs(eta))
                out = e / (1.0 + e) ** 2
            elif k == "probit":
                out = normal_pdf(eta)
            elif k == "loglog":
                out = np.exp(-eta - np.exp(-eta))
            else:
                out = np.exp(eta - np.exp(eta))
        return _out(np.nan_to_num(out, nan=0.0))


def get_link(link) -> LinkFunction:
    if isinstance(link, LinkFunction):
        return link
    return LinkFunction(str(link).lower())


def taylor_slope(link) -> float:
    """Slope a1 of the first-order expansion log g^{-1}(eta) ~ a0 + a1 eta at 0."""
    g = get_link(link)
    if not g.is_unit:
        raise DomainError("taylor_slope is defined for the unit-interval links only")
    return float(g.inv_derivative(0.0)) / float(g.inverse(0.0))


def taylor_intercept(link) -> float:
    """Intercept a0 = log g^{-1}(0) of the same expansion."""
    g = get_link(link)
    if not g.is_unit:
        raise DomainError("taylor_intercept is defined for the unit-interval links only")
    return math.log(float(g.inverse(0.0)))


def link_apply(link, v):
    return get_link(link).apply(v)


def link_inverse(link, eta):
    return get_link(link).inverse(eta)


def link_inv_derivative(link, eta):
    return get_link(link).inv_derivative(eta)
