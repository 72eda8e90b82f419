"""GB3 quantile regression: model specification, likelihood and ML fitting.

Each observation follows the quantile-parameterized GB3 law with

    g1(mu_i) = x_i' theta,   log(alpha_i) = z_i' nu,   log(beta_i) = w_i' eta

at a fixed probability level ``tau``.  Coefficients are estimated by
maximizing the log-likelihood with BFGS; the score and the observed
information are obtained by central finite differences.
"""

from __future__ import annotations

import math
from collections import OrderedDict
from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

import numpy as np
import scipy.linalg
from numba import njit

from .links import LINK_CODES, LinkFunction, get_link
from .specfun import DomainError, Tolerance, _inv_pair, _lbeta, normal_cdf, normal_quantile

__all__ = [
    "Dataset",
    "ModelSpec",
    "Coefficients",
    "FitResult",
    "WaldRow",
    "SingularInformationError",
    "FIT_TOL",
    "predictors",
    "log_likelihood",
    "pointwise_loglik",
    "score",
    "observed_information",
    "covariance_from_information",
    "fit",
    "fitted_parameters",
    "lambda_rows",
    "initial_coefficients",
    "wald_inference",
    "EvaluationError",
]

INTERCEPT = "(Intercept)"
COMPONENTS = ("mu", "alpha", "beta")
FIT_TOL = Tolerance(abs_tol=1e-5, rel_tol=1e-8, max_iter=500)
# |log alpha_i|, |log beta_i| beyond this are treated as outside the parameter
# space; past ~e^40 the beta quantiles lose the precision the likelihood needs
SHAPE_BOUND = 40.0
# a line-search stall counts as convergence when a full quasi-Newton step
# promises less than this relative gain
_RESOLUTION = 1e-9
_EPS = np.finfo(float).eps
_INNER_ABS, _INNER_REL, _INNER_MAXIT = 1e-12, 1e-15, 200


class SingularInformationError(np.linalg.LinAlgError):
    """The observed information matrix is not positive definite."""


# --------------------------------------------------------------------------
# Data containers
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Dataset:
    y: np.ndarray
    covariates: np.ndarray
    names: tuple[str, ...]

    def __post_init__(self):
        y = np.ascontiguousarray(self.y, dtype=float).ravel()
        cov = np.asarray(self.covariates, dtype=float)
        if cov.ndim == 1:
            cov = cov.reshape(-1, 1) if cov.size else np.empty((y.size, 0))
        names = tuple(str(n) for n in self.names)
        if cov.shape != (y.size, len(names)):
            raise DomainError(
                f"covariates have shape {cov.shape}, expected ({y.size}, {len(names)})"
            )
        if len(set(names)) != len(names):
            raise DomainError("covariate names must be unique")
        if INTERCEPT in names:
            raise DomainError(f"{INTERCEPT!r} is reserved")
        if not np.all(np.isfinite(y)) or not np.all(np.isfinite(cov)):
            raise DomainError("dataset contains non-finite entries")
        bad = np.flatnonzero(~((y > 0) & (y < 1)))
        if bad.size:
            raise DomainError(f"response must lie in (0, 1); row {bad[0]} has {y[bad[0]]!r}")
        y.setflags(write=False)
        cov = np.array(cov)
        cov.setflags(write=False)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "covariates", cov)
        object.__setattr__(self, "names", names)

    @classmethod
    def from_columns(cls, y, columns: Mapping[str, Sequence[float]]) -> "Dataset":
        names = tuple(columns)
        y = np.asarray(y, dtype=float)
        cov = np.column_stack([np.asarray(columns[k], float) for k in names]) if names else (
            np.empty((y.size, 0))
        )
        return cls(y, cov, names)

    @property
    def n(self) -> int:
        return self.y.size

    def column(self, name: str) -> np.ndarray:
        try:
            return self.covariates[:, self.names.index(name)]
        except ValueError:
            raise KeyError(f"no covariate named {name!r}") from None


@dataclass(frozen=True)
class ModelSpec:
    tau: float
    mu_terms: tuple[str, ...] = ()
    alpha_terms: tuple[str, ...] = ()
    beta_terms: tuple[str, ...] = ()
    mu_link: LinkFunction = LinkFunction("logit")
    shape_link: LinkFunction = LinkFunction("log")
    mu_intercept: bool = True
    alpha_intercept: bool = True
    beta_intercept: bool = True

    def __post_init__(self):
        if not (0 < self.tau < 1):
            raise DomainError("tau must lie in (0, 1)")
        for comp in COMPONENTS:
            terms = tuple(getattr(self, f"{comp}_terms"))
            if len(set(terms)) != len(terms):
                raise DomainError(f"duplicate terms in the {comp} predictor")
            object.__setattr__(self, f"{comp}_terms", terms)
        mu_link = get_link(self.mu_link)
        if not mu_link.is_unit:
            raise DomainError("the quantile link must map (0, 1) to the real line")
        shape_link = get_link(self.shape_link)
        if shape_link.kind != "log":
            raise DomainError("only the log link is supported for the shape predictors")
        object.__setattr__(self, "mu_link", mu_link)
        object.__setattr__(self, "shape_link", shape_link)
        if self.n_params == 0 or min(self.dims) == 0:
            raise DomainError("each predictor needs at least one term")

    def terms(self, component: str) -> tuple[str, ...]:
        own = getattr(self, f"{component}_terms")
        return ((INTERCEPT,) if getattr(self, f"{component}_intercept") else ()) + own

    @property
    def dims(self) -> tuple[int, int, int]:
        return tuple(len(self.terms(c)) for c in COMPONENTS)

    @property
    def n_params(self) -> int:
        return sum(self.dims)

    def coef_labels(self) -> list[tuple[str, str]]:
        return [(c, t) for c in COMPONENTS for t in self.terms(c)]

    def drop(self, component: str, term: str) -> "ModelSpec":
        """Spec with one non-intercept term removed from a predictor."""
        terms = getattr(self, f"{component}_terms")
        if term not in terms:
            raise KeyError(f"{term!r} is not a {component} term")
        return replace(self, **{f"{component}_terms": tuple(t for t in terms if t != term)})

    def design(self, data: Dataset) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Design matrices (X, Z, W); raises on rank deficiency."""
        mats = []
        for comp in COMPONENTS:
            cols = [
                np.ones(data.n) if t == INTERCEPT else data.column(t) for t in self.terms(comp)
            ]
            m = np.ascontiguousarray(np.column_stack(cols))
            _check_rank(m, comp)
            mats.append(m)
        if self.n_params >= data.n:
            raise DomainError(
                f"model has {self.n_params} parameters but only {data.n} observations"
            )
        return tuple(mats)


def _check_rank(m: np.ndarray, component: str) -> None:
    _, r, _ = scipy.linalg.qr(m, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    tol = diag.max(initial=0.0) * max(m.shape) * _EPS
    rank = int(np.sum(diag > tol))
    if rank < m.shape[1]:
        raise DomainError(
            f"design matrix of the {component} predictor has rank {rank} < {m.shape[1]}"
        )


@dataclass(frozen=True)
class Coefficients:
    theta: np.ndarray
    nu: np.ndarray
    eta: np.ndarray

    def __post_init__(self):
        for name in ("theta", "nu", "eta"):
            object.__setattr__(self, name, np.atleast_1d(np.asarray(getattr(self, name), float)))

    def vector(self) -> np.ndarray:
        return np.concatenate([self.theta, self.nu, self.eta])

    @classmethod
    def from_vector(cls, spec: ModelSpec, vec) -> "Coefficients":
        k, l, m = spec.dims
        vec = np.asarray(vec, dtype=float)
        if vec.size != k + l + m:
            raise DomainError(f"expected {k + l + m} coefficients, got {vec.size}")
        return cls(vec[:k].copy(), vec[k:k + l].copy(), vec[k + l:].copy())

    @classmethod
    def zeros(cls, spec: ModelSpec) -> "Coefficients":
        return cls.from_vector(spec, np.zeros(spec.n_params))

    def check(self, spec: ModelSpec) -> None:
        if (self.theta.size, self.nu.size, self.eta.size) != spec.dims:
            raise DomainError(
                f"coefficient lengths {(self.theta.size, self.nu.size, self.eta.size)} "
                f"do not match the model dimensions {spec.dims}"
            )


@dataclass(frozen=True, eq=False)
class FitResult:
    """Outcome of a maximum-likelihood fit.

    ``gradient_norm`` is the sup-norm of the score with respect to the
    standardized coefficients (non-intercept columns centred and scaled to
    unit variance) in which the optimizer works.
    """

    coefficients: Coefficients
    std_errors: Coefficients
    covariance: np.ndarray | None
    loglik: float
    aic: float
    bic: float
    converged: bool
    n_iter: int
    gradient_norm: float
    tau: float
    spec: ModelSpec
    n_obs: int
    message: str = ""
    history: tuple[float, ...] = field(default=(), repr=False)

    @property
    def n_params(self) -> int:
        return self.spec.n_params

    @property
    def se_available(self) -> bool:
        return self.covariance is not None

    def estimates(self) -> np.ndarray:
        return self.coefficients.vector()


# --------------------------------------------------------------------------
# Compiled kernels
# --------------------------------------------------------------------------


@njit(cache=True)
def _mu_inverse(eta, code):
    if code == 0:
        if eta >= 0.0:
            mu = 1.0 / (1.0 + math.exp(-eta))
        else:
            e = math.exp(eta)
            mu = e / (1.0 + e)
    elif code == 1:
        mu = 0.5 * math.erfc(-eta / math.sqrt(2.0))
    elif code == 2:
        mu = math.exp(-math.exp(-eta)) if eta > -700.0 else 0.0
    else:
        mu = -math.expm1(-math.exp(eta)) if eta < 700.0 else 1.0
    if mu < 1e-12:
        mu = 1e-12
    elif mu > 1.0 - 1e-12:
        mu = 1.0 - 1e-12
    return mu


@njit(cache=True)
def _log_zeta(tau, alpha, beta, z0, z_out, logzeta_out):
    """log(z / (1 - z)) per row; consecutive identical shape pairs share work.

    Returns False if any inversion fails.
    """
    n = alpha.size
    prev_a = -1.0
    prev_b = -1.0
    for i in range(n):
        a = alpha[i]
        b = beta[i]
        if a == prev_a and b == prev_b:
            z_out[i] = z_out[i - 1]
            logzeta_out[i] = logzeta_out[i - 1]
            continue
        if not (a > 0.0 and b > 0.0) or not (math.isfinite(a) and math.isfinite(b)):
            return False
        z, zc = _inv_pair(tau, a, b, z0[i], _INNER_ABS, _INNER_REL, _INNER_MAXIT)
        if not (z > 0.0 and zc > 0.0):
            return False
        z_out[i] = z
        logzeta_out[i] = math.log(z) - math.log(zc)
        prev_a = a
        prev_b = b
    return True


@njit(cache=True)
def _loglik_rows(y_log, y_log1m, eta_mu, alpha, beta, logzeta, code, out):
    # (b - 1) log(1 - y) - (a + b) log((1 - y) + lam y) is folded into
    # -(a + 1) log(1 - y) - (a + b) log1p(lam y / (1 - y)) so that large
    # beta does not produce cancelling terms of size beta.
    n = alpha.size
    for i in range(n):
        a = alpha[i]
        b = beta[i]
        mu = _mu_inverse(eta_mu[i], code)
        log_lam = math.log1p(-mu) - math.log(mu) + logzeta[i]
        r = log_lam + y_log[i] - y_log1m[i]
        if r > 0.0:
            soft = r + math.log1p(math.exp(-r))
        else:
            soft = math.log1p(math.exp(r))
        out[i] = (
            a * log_lam
            + (a - 1.0) * y_log[i]
            - (a + 1.0) * y_log1m[i]
            - _lbeta(a, b)
            - (a + b) * soft
        )


# --------------------------------------------------------------------------
# Likelihood evaluator
# --------------------------------------------------------------------------


class _Model:
    """Design matrices plus a keyed cache of beta quantiles.

    The cache maps the exact bytes of the (alpha, beta) vectors to the
    corresponding log z/(1-z) values, so perturbations of the quantile
    coefficients never trigger a fresh inversion.  The most recent z vector
    warm-starts new inversions.
    """

    _CACHE_SIZE = 8

    def __init__(self, spec: ModelSpec, data: Dataset, designs=None):
        self.spec = spec
        self.data = data
        self.X, self.Z, self.W = spec.design(data) if designs is None else designs
        self.k, self.l, self.m = spec.dims
        self.tau = float(spec.tau)
        self.code = LINK_CODES[spec.mu_link.kind]
        self.y_log = np.log(data.y)
        self.y_log1m = np.log1p(-data.y)
        self._cache: OrderedDict[bytes, np.ndarray] = OrderedDict()
        self._z_last = np.full(data.n, -1.0)
        self._rows = np.empty(data.n)

    def linear_predictors(self, vec):
        vec = np.asarray(vec, dtype=float)
        k, l = self.k, self.l
        return self.X @ vec[:k], self.Z @ vec[k:k + l], self.W @ vec[k + l:]

    def shapes(self, vec):
        _, ea, eb = self.linear_predictors(vec)
        with np.errstate(over="ignore"):
            return np.exp(ea), np.exp(eb)

    def log_zeta(self, alpha, beta):
        key = alpha.tobytes() + beta.tobytes()
        hit = self._cache.get(key)
        if hit is not None:
            self._cache.move_to_end(key)
            return hit
        z = np.empty(alpha.size)
        lz = np.empty(alpha.size)
        if not _log_zeta(self.tau, alpha, beta, self._z_last, z, lz):
            return None
        self._z_last = z
        self._cache[key] = lz
        if len(self._cache) > self._CACHE_SIZE:
            self._cache.popitem(last=False)
        return lz

    def rows(self, vec) -> np.ndarray | None:
        em, ea, eb = self.linear_predictors(vec)
        if not (np.all(np.isfinite(em)) and np.all(np.abs(ea) <= SHAPE_BOUND)
                and np.all(np.abs(eb) <= SHAPE_BOUND)):
            return None
        alpha = np.exp(ea)
        beta = np.exp(eb)
        lz = self.log_zeta(alpha, beta)
        if lz is None:
            return None
        out = np.empty(alpha.size)
        _loglik_rows(self.y_log, self.y_log1m, em, alpha, beta, lz, self.code, out)
        return out

    def loglik(self, vec) -> float:
        r = self.rows(vec)
        if r is None:
            return -math.inf
        total = float(np.sum(r))
        return total if math.isfinite(total) else -math.inf


def _model(spec: ModelSpec, data: Dataset) -> _Model:
    return _Model(spec, data)


def _standardize(spec: ModelSpec, mats):
    """Centre and scale non-intercept columns.

    Returns the transformed designs and the block-diagonal matrix A with
    original = A @ standardized coefficients.
    """
    out = []
    blocks = []
    for comp, m in zip(COMPONENTS, mats):
        terms = spec.terms(comp)
        has_int = terms[0] == INTERCEPT
        q = m.shape[1]
        A = np.eye(q)
        mt = m.copy()
        for j, t in enumerate(terms):
            if t == INTERCEPT:
                continue
            col = m[:, j]
            centre = float(col.mean()) if has_int else 0.0
            scale = float(np.sqrt(np.mean((col - centre) ** 2)))
            if not scale > 0:
                scale = 1.0
            mt[:, j] = (col - centre) / scale
            A[j, j] = 1.0 / scale
            if has_int:
                A[0, j] = -centre / scale
        out.append(np.ascontiguousarray(mt))
        blocks.append(A)
    return tuple(out), scipy.linalg.block_diag(*blocks)


def _as_vector(spec: ModelSpec, c) -> np.ndarray:
    if isinstance(c, Coefficients):
        c.check(spec)
        return c.vector()
    vec = np.asarray(c, dtype=float).ravel()
    if vec.size != spec.n_params:
        raise DomainError(f"expected {spec.n_params} coefficients, got {vec.size}")
    return vec


# --------------------------------------------------------------------------
# Public operations
# --------------------------------------------------------------------------


def predictors(spec: ModelSpec, data: Dataset, c) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-row (mu_i, alpha_i, beta_i)."""
    vec = _as_vector(spec, c)
    X, Z, W = spec.design(data)
    k, l, _ = spec.dims
    mu = np.asarray(spec.mu_link.inverse(X @ vec[:k]), dtype=float).reshape(-1)
    with np.errstate(over="ignore"):
        alpha = np.exp(Z @ vec[k:k + l])
        beta = np.exp(W @ vec[k + l:])
    return mu, alpha, beta


def lambda_rows(tau: float, mu, alpha, beta) -> np.ndarray:
    """Row-wise lam = (1 - mu)/mu * z/(1 - z), z the Beta(alpha_i, beta_i) tau-quantile."""
    mu, alpha, beta = (np.ascontiguousarray(v, dtype=float).ravel() for v in (mu, alpha, beta))
    n = mu.size
    z = np.empty(n)
    lz = np.empty(n)
    if not _log_zeta(float(tau), alpha, beta, np.full(n, -1.0), z, lz):
        raise EvaluationError("beta quantile inversion failed at these shapes")
    return np.exp(np.log1p(-mu) - np.log(mu) + lz)


def fitted_parameters(fr: "FitResult", data: Dataset):
    """Per-row (mu, alpha, beta, lam) implied by a fit."""
    mu, alpha, beta = predictors(fr.spec, data, fr.coefficients)
    return mu, alpha, beta, lambda_rows(fr.spec.tau, mu, alpha, beta)


class EvaluationError(ArithmeticError):
    """The log-likelihood is not finite at the requested point."""


def pointwise_loglik(spec: ModelSpec, data: Dataset, c) -> np.ndarray:
    r = _model(spec, data).rows(_as_vector(spec, c))
    if r is None or not np.all(np.isfinite(r)):
        raise EvaluationError("log-likelihood is not finite at these coefficients")
    return r


def log_likelihood(spec: ModelSpec, data: Dataset, c) -> float:
    """Sum of per-observation GB3 log-densities in the quantile parameterization."""
    return float(np.sum(pointwise_loglik(spec, data, c)))


def _fd_steps(vec, power):
    return _EPS ** power * np.maximum(1.0, np.abs(vec))


def _score(model: _Model, vec) -> np.ndarray:
    h = _fd_steps(vec, 1.0 / 3.0)
    g = np.empty(vec.size)
    for j in range(vec.size):
        up = vec.copy()
        dn = vec.copy()
        up[j] += h[j]
        dn[j] -= h[j]
        hj = up[j] - dn[j]
        fu = model.loglik(up)
        fd = model.loglik(dn)
        if not (math.isfinite(fu) and math.isfinite(fd)):
            raise EvaluationError(f"log-likelihood not finite around coordinate {j}")
        g[j] = (fu - fd) / hj
    return g


def score(spec: ModelSpec, data: Dataset, c) -> np.ndarray:
    """Central finite-difference gradient of the log-likelihood."""
    vec = _as_vector(spec, c)
    model = _model(spec, data)
    if not math.isfinite(model.loglik(vec)):
        raise EvaluationError("log-likelihood is not finite at these coefficients")
    return _score(model, vec)


def _hessian(model: _Model, vec) -> np.ndarray:
    p = vec.size
    h = _fd_steps(vec, 0.25)
    f0 = model.loglik(vec)

    def f(shift):
        val = model.loglik(vec + shift)
        if not math.isfinite(val):
            raise EvaluationError("log-likelihood not finite on the Hessian stencil")
        return val

    H = np.empty((p, p))
    for i in range(p):
        ei = np.zeros(p)
        ei[i] = h[i]
        H[i, i] = (f(ei) - 2.0 * f0 + f(-ei)) / (h[i] * h[i])
        for j in range(i):
            ej = np.zeros(p)
            ej[j] = h[j]
            H[i, j] = (f(ei + ej) - f(ei - ej) - f(ej - ei) + f(-ei - ej)) / (4.0 * h[i] * h[j])
            H[j, i] = H[i, j]
    return 0.5 * (H + H.T)


def observed_information(spec: ModelSpec, data: Dataset, c) -> np.ndarray:
    """Negative finite-difference Hessian of the log-likelihood, symmetrized."""
    vec = _as_vector(spec, c)
    model = _model(spec, data)
    if not math.isfinite(model.loglik(vec)):
        raise EvaluationError("log-likelihood is not finite at these coefficients")
    return -_hessian(model, vec)


def covariance_from_information(info: np.ndarray) -> np.ndarray:
    """Inverse of the observed information via Cholesky; no pseudo-inverse."""
    try:
        L = np.linalg.cholesky(info)
    except np.linalg.LinAlgError:
        raise SingularInformationError("observed information is not positive definite") from None
    eye = np.eye(info.shape[0])
    Linv = scipy.linalg.solve_triangular(L, eye, lower=True)
    cov = Linv.T @ Linv
    return 0.5 * (cov + cov.T)


def initial_coefficients(spec: ModelSpec, data: Dataset) -> Coefficients:
    """Least-squares start for theta on g1(y) (y winsorized); zero shape coefficients."""
    X, _, _ = spec.design(data)
    y_adj = np.clip(data.y, 1e-4, 1 - 1e-4)
    target = np.asarray(spec.mu_link.apply(y_adj), dtype=float)
    theta, *_ = np.linalg.lstsq(X, target, rcond=None)
    _, l, m = spec.dims
    return Coefficients(theta, np.zeros(l), np.zeros(m))


def _bfgs(model: _Model, x0: np.ndarray, tol: Tolerance):
    """Maximize the log-likelihood by BFGS with Armijo backtracking.

    Returns (x, loglik, gradient, n_iter, converged, message, history).
    """
    c1 = 1e-4
    x = x0.copy()
    f = -model.loglik(x)
    if not math.isfinite(f):
        raise EvaluationError("log-likelihood is not finite at the starting values")
    g = -_score(model, x)
    p = x.size
    Hinv = np.eye(p)
    first = True
    history = [-f]
    rel_change = 0.0
    message = "maximum number of iterations reached"
    converged = False
    resets = 0
    it = 0
    for it in range(1, int(tol.max_iter) + 1):
        gnorm = float(np.max(np.abs(g)))
        if gnorm <= tol.abs_tol and rel_change <= tol.rel_tol:
            converged = True
            message = "converged"
            it -= 1
            break
        d = -Hinv @ g
        slope = float(g @ d)
        if slope >= 0:
            Hinv = np.eye(p)
            first = True
            d = -g
            slope = float(g @ d)
        t = 1.0
        if first:
            t = min(1.0, 1.0 / max(gnorm, 1e-12))
        accepted = False
        for _ in range(60):
            x_new = x + t * d
            f_new = -model.loglik(x_new)
            if math.isfinite(f_new) and f_new <= f + c1 * t * slope:
                accepted = True
                break
            t *= 0.5
        if not accepted:
            if resets == 0 and not first:
                Hinv = np.eye(p)
                first = True
                resets += 1
                continue
            message = "line search failed to improve the log-likelihood"
            converged = gnorm <= tol.abs_tol or -slope <= _RESOLUTION * max(1.0, abs(f))
            if converged:
                message = "converged (no further improvement at numerical resolution)"
            it -= 1
            break
        try:
            g_new = -_score(model, x_new)
        except EvaluationError:
            message = "log-likelihood not finite near the current iterate"
            break
        s = x_new - x
        yv = g_new - g
        sy = float(s @ yv)
        rel_change = abs(f - f_new) / max(1.0, abs(f_new))
        x, f, g = x_new, f_new, g_new
        history.append(-f)
        if sy > 1e-10 * np.linalg.norm(s) * np.linalg.norm(yv):
            if first:
                Hinv = np.eye(p) * (sy / float(yv @ yv))
                first = False
            rho = 1.0 / sy
            Hy = Hinv @ yv
            Hinv = (
                Hinv
                - rho * (np.outer(s, Hy) + np.outer(Hy, s))
                + (rho * rho * float(yv @ Hy) + rho) * np.outer(s, s)
            )
        resets = 0
    else:
        gnorm = float(np.max(np.abs(g)))
        converged = gnorm <= tol.abs_tol and rel_change <= tol.rel_tol
        if converged:
            message = "converged"
    return x, -f, -g, it, converged, message, tuple(history)


def fit(
    spec: ModelSpec,
    data: Dataset,
    init: Coefficients | None = None,
    tol: Tolerance = FIT_TOL,
) -> FitResult:
    """Maximum-likelihood fit with Wald standard errors from the observed information."""
    if init is None:
        init = initial_coefficients(spec, data)
    x0 = _as_vector(spec, init)
    designs, A = _standardize(spec, spec.design(data))
    model = _Model(spec, data, designs)
    # the optimizer and its convergence test work on standardized
    # coefficients; A maps them back
    x, ll, grad, n_iter, converged, message, history = _bfgs(model, np.linalg.solve(A, x0), tol)
    coefs = Coefficients.from_vector(spec, A @ x)
    p = spec.n_params
    n = data.n
    covariance = None
    ses = np.full(p, np.nan)
    try:
        info = -_hessian(model, x)
        covariance = A @ covariance_from_information(info) @ A.T
        covariance = 0.5 * (covariance + covariance.T)
        ses = np.sqrt(np.diag(covariance))
    except (SingularInformationError, EvaluationError) as exc:
        message = f"{message}; standard errors unavailable ({exc})"
    return FitResult(
        coefficients=coefs,
        std_errors=Coefficients.from_vector(spec, ses),
        covariance=covariance,
        loglik=ll,
        aic=-2.0 * ll + 2.0 * p,
        bic=-2.0 * ll + p * math.log(n),
        converged=converged,
        n_iter=n_iter,
        gradient_norm=float(np.max(np.abs(grad))),
        tau=spec.tau,
        spec=spec,
        n_obs=n,
        message=message,
        history=history,
    )


@dataclass(frozen=True)
class WaldRow:
    component: str
    term: str
    estimate: float
    se: float
    z: float
    p_value: float
    ci_low: float
    ci_high: float


def wald_inference(fr: FitResult, level: float = 0.95) -> list[WaldRow]:
    """Wald z statistics, two-sided normal p-values and confidence intervals."""
    if not (0 < level < 1):
        raise DomainError("level must lie in (0, 1)")
    crit = normal_quantile(1.0 - (1.0 - level) / 2.0)
    est = fr.coefficients.vector()
    se = fr.std_errors.vector()
    rows = []
    for (comp, term), b, s in zip(fr.spec.coef_labels(), est, se):
        if s > 0 and math.isfinite(s):
            z = b / s
            pval = 2.0 * normal_cdf(-abs(z))
        else:
            z = pval = math.nan
        rows.append(WaldRow(comp, term, float(b), float(s), float(z), float(pval),
                            float(b - crit * s), float(b + crit * s)))
    return rows
