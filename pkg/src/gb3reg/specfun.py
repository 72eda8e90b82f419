"""Special functions and random variates.

Scalar kernels are compiled with numba and exposed through thin numpy
wrappers that validate their inputs.  Kernels signal domain problems with
NaN; the wrappers turn that into ``DomainError`` or ``ConvergenceError``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit, vectorize

__all__ = [
    "DomainError",
    "ConvergenceError",
    "Tolerance",
    "log_gamma",
    "log_beta",
    "inc_beta_ratio",
    "inv_inc_beta",
    "sample_gamma",
    "normal_cdf",
    "normal_quantile",
    "normal_pdf",
]


class DomainError(ValueError):
    """An argument lies outside the domain of the function."""


class ConvergenceError(RuntimeError):
    """An iterative solver ran out of iterations."""


@dataclass(frozen=True)
class Tolerance:
    abs_tol: float = 1e-12
    rel_tol: float = 1e-14
    max_iter: int = 200

    def __post_init__(self):
        if not (self.abs_tol > 0 and self.rel_tol > 0):
            raise DomainError("tolerances must be positive")
        if int(self.max_iter) < 1:
            raise DomainError("max_iter must be >= 1")


DEFAULT_TOL = Tolerance()

_TINY = 1e-300
_EPS = 2.220446049250313e-16
_CF_MAX_ITER = 20000


# --------------------------------------------------------------------------
# Scalar kernels
# --------------------------------------------------------------------------


_HALF_LOG_2PI = 0.9189385332046727

# Bernoulli-series coefficients of the Stirling remainder
_STIRLING = np.array([
    1.0 / 12.0, -1.0 / 360.0, 1.0 / 1260.0, -1.0 / 1680.0, 1.0 / 1188.0,
    -691.0 / 360360.0, 1.0 / 156.0, -3617.0 / 122400.0,
])


@njit(cache=True)
def _stirling_rem(x):
    # lgamma(x) - [(x - 1/2) log x - x + log(2 pi)/2], valid for x >= 10
    r = 1.0 / x
    r2 = r * r
    acc = 0.0
    for k in range(_STIRLING.size - 1, -1, -1):
        acc = acc * r2 + _STIRLING[k]
    return acc * r


@njit(cache=True)
def _lbeta(a, b):
    """log B(a, b) without cancellation between large log-gammas."""
    if a > b:
        a, b = b, a
    if b < 10.0:
        return math.lgamma(a) + math.lgamma(b) - math.lgamma(a + b)
    s = a + b
    corr = _stirling_rem(b) - _stirling_rem(s)
    if a < 10.0:
        # lgamma(b) - lgamma(a + b) expanded around b
        return (math.lgamma(a) + corr - (b - 0.5) * math.log1p(a / b)
                - a * math.log(s) + a)
    return (_HALF_LOG_2PI - 0.5 * math.log(b) + (a - 0.5) * math.log(a / s)
            - b * math.log1p(a / b) + _stirling_rem(a) + corr)


@njit(cache=True)
def _betacf(x, a, b):
    # Modified Lentz evaluation of the incomplete beta continued fraction.
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _TINY:
        d = _TINY
    d = 1.0 / d
    h = d
    for m in range(1, _CF_MAX_ITER + 1):
        m2 = 2.0 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _TINY:
            d = _TINY
        c = 1.0 + aa / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _TINY:
            d = _TINY
        c = 1.0 + aa / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 3e-16:
            return h
    return np.nan


@njit(cache=True)
def _inc_beta(x, a, b):
    if not (a > 0.0 and b > 0.0) or not (0.0 <= x <= 1.0):
        return np.nan
    if x == 0.0:
        return 0.0
    if x == 1.0:
        return 1.0
    log_front = a * math.log(x) + b * math.log1p(-x) - _lbeta(a, b)
    if x < (a + 1.0) / (a + b + 2.0):
        return math.exp(log_front) * _betacf(x, a, b) / a
    return 1.0 - math.exp(log_front) * _betacf(1.0 - x, b, a) / b


@njit(cache=True)
def _beta_log_density(x, a, b, lbeta):
    return (a - 1.0) * math.log(x) + (b - 1.0) * math.log1p(-x) - lbeta


@njit(cache=True)
def _inv_inc_beta_guess(p, a, b):
    if a >= 1.0 and b >= 1.0:
        pp = p if p < 0.5 else 1.0 - p
        t = math.sqrt(-2.0 * math.log(pp))
        x = (2.30753 + t * 0.27061) / (1.0 + t * (0.99229 + t * 0.04481)) - t
        if p < 0.5:
            x = -x
        al = (x * x - 3.0) / 6.0
        h = 2.0 / (1.0 / (2.0 * a - 1.0) + 1.0 / (2.0 * b - 1.0))
        w = x * math.sqrt(al + h) / h - (1.0 / (2.0 * b - 1.0) - 1.0 / (2.0 * a - 1.0)) * (
            al + 5.0 / 6.0 - 2.0 / (3.0 * h)
        )
        return a / (a + b * math.exp(2.0 * w))
    lna = math.log(a / (a + b))
    lnb = math.log(b / (a + b))
    t = math.exp(a * lna) / a
    u = math.exp(b * lnb) / b
    w = t + u
    if p < t / w:
        return math.pow(a * w * p, 1.0 / a)
    return 1.0 - math.pow(b * w * (1.0 - p), 1.0 / b)


@njit(cache=True)
def _inv_core(p, a, b, x0, abs_tol, rel_tol, max_iter):
    # Newton on I_x(a, b) = p inside a shrinking bracket; NaN on exhaustion.
    lbeta = _lbeta(a, b)
    x = x0
    lo = 0.0
    hi = 1.0
    for _ in range(max_iter):
        f = _inc_beta(x, a, b) - p
        if f == 0.0:
            return x
        if f < 0.0:
            lo = x
        else:
            hi = x
        dens = math.exp(_beta_log_density(x, a, b, lbeta))
        step = f / dens if dens > 0.0 else np.inf
        x_new = x - step
        if not (lo < x_new < hi) or not math.isfinite(x_new):
            # bisection, geometric on wide brackets near zero
            if lo > 0.0 and hi / lo > 4.0:
                x_new = math.sqrt(lo * hi)
            elif lo == 0.0 and hi < 0.25:
                x_new = hi * 0.0625
            else:
                x_new = 0.5 * (lo + hi)
        if abs(x_new - x) <= rel_tol * x_new and abs(f) <= abs_tol:
            return x_new
        if x_new == x or hi - lo <= 4.0 * _EPS * hi:
            # bracket exhausted at double resolution
            return x_new
        x = x_new
    return np.nan


@njit(cache=True)
def _inv_pair(p, a, b, x0, abs_tol, rel_tol, max_iter):
    """Return (z, 1 - z) with I_z(a, b) = p.

    The root is searched in whichever orientation keeps it below one half,
    so the smaller of z and 1 - z carries full relative precision.
    ``x0`` outside (0, 1) requests the normal-approximation starting guess.
    """
    if not (a > 0.0 and b > 0.0) or not (0.0 <= p <= 1.0):
        return np.nan, np.nan
    if p == 0.0:
        return 0.0, 1.0
    if p == 1.0:
        return 1.0, 0.0
    x = x0
    if not (0.0 < x < 1.0):
        x = _inv_inc_beta_guess(p, a, b)
        if not (0.0 < x < 1.0) or not math.isfinite(x):
            x = a / (a + b)
    if p > _inc_beta(0.5, a, b):
        if x <= 0.5:
            x = 0.75
        y = _inv_core(1.0 - p, b, a, 1.0 - x, abs_tol, rel_tol, max_iter)
        return 1.0 - y, y
    if x > 0.5:
        x = 0.25
    z = _inv_core(p, a, b, x, abs_tol, rel_tol, max_iter)
    return z, 1.0 - z


@njit(cache=True)
def _inv_inc_beta(p, a, b, x0, abs_tol, rel_tol, max_iter):
    return _inv_pair(p, a, b, x0, abs_tol, rel_tol, max_iter)[0]


@vectorize(["float64(float64, float64)"], cache=True)
def _lbeta_ufunc(a, b):
    return _lbeta(a, b)


@vectorize(["float64(float64, float64, float64)"], cache=True)
def _inc_beta_ufunc(x, a, b):
    return _inc_beta(x, a, b)


@vectorize(
    ["float64(float64, float64, float64, float64, float64, float64, int64)"], cache=True
)
def _inv_inc_beta_ufunc(p, a, b, x0, abs_tol, rel_tol, max_iter):
    return _inv_inc_beta(p, a, b, x0, abs_tol, rel_tol, max_iter)


# Wichura (1988), algorithm AS 241 (PPND16).
@njit(cache=True)
def _ndtri(p):
    if not (0.0 < p < 1.0):
        return np.nan
    q = p - 0.5
    if abs(q) <= 0.425:
        r = 0.180625 - q * q
        num = (((((((2.5090809287301226727e3 * r + 3.3430575583588128105e4) * r
                    + 6.7265770927008700853e4) * r + 4.5921953931549871457e4) * r
                  + 1.3731693765509461125e4) * r + 1.9715909503065514427e3) * r
                + 1.3314166789178437745e2) * r + 3.3871328727963666080e0)
        den = (((((((5.2264952788528545610e3 * r + 2.8729085735721942674e4) * r
                    + 3.9307895800092710610e4) * r + 2.1213794301586595867e4) * r
                  + 5.3941960214247511077e3) * r + 6.8718700749205790830e2) * r
                + 4.2313330701600911252e1) * r + 1.0)
        return q * num / den
    r = p if q < 0.0 else 1.0 - p
    r = math.sqrt(-math.log(r))
    if r <= 5.0:
        r -= 1.6
        num = (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r
                    + 2.41780725177450611770e-1) * r + 1.27045825245236838258e0) * r
                  + 3.64784832476320460504e0) * r + 5.76949722146069140550e0) * r
                + 4.63033784615654529590e0) * r + 1.42343711074968357734e0)
        den = (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r
                    + 1.51986665636164571966e-2) * r + 1.48103976427480074590e-1) * r
                  + 6.89767334985100004550e-1) * r + 1.67638483018380384940e0) * r
                + 2.05319162663775882187e0) * r + 1.0)
    else:
        r -= 5.0
        num = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r
                    + 1.24266094738807843860e-3) * r + 2.65321895265761230930e-2) * r
                  + 2.96560571828504891230e-1) * r + 1.78482653991729133580e0) * r
                + 5.46378491116411436990e0) * r + 6.65790464350110377720e0)
        den = (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r
                    + 1.84631831751005468180e-5) * r + 7.86869131145613259100e-4) * r
                  + 1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r
                + 5.99832206555887937690e-1) * r + 1.0)
    val = num / den
    return -val if q < 0.0 else val


@njit(cache=True)
def _ndtr(x):
    return 0.5 * math.erfc(-x / math.sqrt(2.0))


@vectorize(["float64(float64)"], cache=True)
def _ndtri_ufunc(p):
    return _ndtri(p)


@vectorize(["float64(float64)"], cache=True)
def _ndtr_ufunc(x):
    return _ndtr(x)


# --------------------------------------------------------------------------
# Public wrappers
# --------------------------------------------------------------------------


def _scalar_or_array(out):
    return float(out) if np.ndim(out) == 0 else out


def log_gamma(x):
    """ln Gamma(x) for x > 0 (array aware)."""
    x = np.asarray(x, dtype=float)
    if np.any(~np.isfinite(x)) or np.any(x <= 0):
        raise DomainError("log_gamma requires finite x > 0")
    return _scalar_or_array(np.vectorize(math.lgamma, otypes=[float])(x))


def log_beta(a, b):
    """ln B(a, b) for a, b > 0."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if np.any(~np.isfinite(a)) or np.any(~np.isfinite(b)) or np.any(a <= 0) or np.any(b <= 0):
        raise DomainError("log_beta requires finite a, b > 0")
    return _scalar_or_array(_lbeta_ufunc(a, b))


def _check_shapes(a, b):
    if np.any(~(a > 0)) or np.any(~(b > 0)) or np.any(~np.isfinite(a)) or np.any(~np.isfinite(b)):
        raise DomainError("shape parameters must be finite and > 0")


def inc_beta_ratio(x, a, b):
    """Regularized incomplete beta function I_x(a, b)."""
    x, a, b = (np.asarray(v, dtype=float) for v in (x, a, b))
    _check_shapes(a, b)
    if np.any(~((x >= 0) & (x <= 1))):
        raise DomainError("x must lie in [0, 1]")
    out = _inc_beta_ufunc(x, a, b)
    if np.any(np.isnan(out)):
        raise ConvergenceError("continued fraction did not converge")
    return _scalar_or_array(out)


def inv_inc_beta(p, a, b, tol: Tolerance = DEFAULT_TOL, x0=None):
    """Solve I_z(a, b) = p for z.

    ``x0`` optionally warm-starts the Newton iteration (values outside
    (0, 1) fall back to the normal-approximation guess).
    """
    p, a, b = (np.asarray(v, dtype=float) for v in (p, a, b))
    _check_shapes(a, b)
    if np.any(~((p >= 0) & (p <= 1))):
        raise DomainError("p must lie in [0, 1]")
    x0 = np.full(np.broadcast(p, a, b).shape, -1.0) if x0 is None else np.asarray(x0, float)
    out = _inv_inc_beta_ufunc(p, a, b, x0, tol.abs_tol, tol.rel_tol, int(tol.max_iter))
    if np.any(np.isnan(out)):
        raise ConvergenceError(
            f"incomplete beta inversion failed to converge in {tol.max_iter} iterations"
        )
    return _scalar_or_array(out)


def normal_cdf(x):
    return _scalar_or_array(_ndtr_ufunc(np.asarray(x, dtype=float)))


def normal_pdf(x):
    x = np.asarray(x, dtype=float)
    return _scalar_or_array(np.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi))


def normal_quantile(p):
    """Inverse of the standard normal CDF on (0, 1)."""
    p = np.asarray(p, dtype=float)
    if np.any(~((p > 0) & (p < 1))):
        raise DomainError("p must lie in (0, 1)")
    return _scalar_or_array(_ndtri_ufunc(p))


# --------------------------------------------------------------------------
# Gamma variates
# --------------------------------------------------------------------------


def _marsaglia_tsang(shape, rng):
    """Gamma(shape, 1) variates for shape >= 1, vectorized rejection."""
    d = shape - 1.0 / 3.0
    c = 1.0 / np.sqrt(9.0 * d)
    out = np.empty_like(d)
    pending = np.arange(d.size)
    while pending.size:
        dp, cp = d[pending], c[pending]
        x = rng.standard_normal(pending.size)
        u = rng.random(pending.size)
        v = (1.0 + cp * x) ** 3
        ok = v > 0
        with np.errstate(invalid="ignore", divide="ignore"):
            logv = np.log(np.where(ok, v, 1.0))
            x2 = x * x
            accept = ok & (
                (u < 1.0 - 0.0331 * x2 * x2)
                | (np.log(u) < 0.5 * x2 + dp * (1.0 - v + logv))
            )
        out[pending[accept]] = (dp * v)[accept]
        pending = pending[~accept]
    return out


def sample_gamma(shape, scale, rng: np.random.Generator, size=None):
    """Gamma(shape, scale) variates (mean shape*scale).

    Uses Marsaglia-Tsang squeeze/rejection; shapes below one are boosted as
    G(a) = G(a + 1) * U**(1/a).
    """
    shape = np.asarray(shape, dtype=float)
    scale = np.asarray(scale, dtype=float)
    if np.any(~np.isfinite(shape)) or np.any(shape <= 0):
        raise DomainError("gamma shape must be finite and > 0")
    if np.any(~np.isfinite(scale)) or np.any(scale <= 0):
        raise DomainError("gamma scale must be finite and > 0")
    if size is None:
        size = np.broadcast(shape, scale).shape
    a = np.broadcast_to(shape, size).astype(float).ravel()
    small = a < 1.0
    draws = _marsaglia_tsang(np.where(small, a + 1.0, a), rng)
    if np.any(small):
        u = rng.random(int(small.sum()))
        draws[small] *= u ** (1.0 / a[small])
    out = draws.reshape(size) * np.broadcast_to(scale, size)
    return _scalar_or_array(out)
