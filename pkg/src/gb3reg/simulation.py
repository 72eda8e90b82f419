"""Monte Carlo studies: parameter recovery, link choice and residual calibration.

Every replication draws from its own generator, spawned from the scenario
seed with ``numpy.random.SeedSequence``, so results do not depend on the
number of workers or on scheduling order.
"""

from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace
from typing import Callable, Sequence

import numpy as np
from scipy import stats

from .diagnostics import prediction_errors, rq_residuals
from .gb3 import gb3_rvs
from .links import UNIT_LINKS, LinkFunction, get_link
from .regression import (
    FIT_TOL,
    Coefficients,
    Dataset,
    FitResult,
    ModelSpec,
    fit,
    lambda_rows,
    predictors,
)
from .specfun import DomainError, Tolerance, normal_quantile

__all__ = [
    "ScenarioConfig",
    "RecoveryReport",
    "LinkChoiceReport",
    "CalibrationReport",
    "scenario_spec",
    "true_coefficients",
    "simulate_dataset",
    "simulate_response",
    "true_quantiles",
    "recovery_study",
    "link_choice_study",
    "residual_calibration",
    "replication_rngs",
    "load_scenario",
    "CFR_TRUTH",
    "cfr_like_covariates",
    "simulate_cfr_like",
    "cfr_full_spec",
]

# y is pushed off the boundary when a draw rounds to 0 or 1
Y_CLIP = 1e-12


@dataclass(frozen=True)
class ScenarioConfig:
    n: int = 305
    tau: float = 0.25
    true_link: LinkFunction = LinkFunction("logit")
    replications: int = 250
    seed: int = 2024
    true_theta: tuple[float, ...] = (-2.0, 1.5, 0.3)
    true_nu: tuple[float, ...] = (1.0, -0.4, 0.7)
    true_eta: tuple[float, ...] = (1.0, -0.5)
    tol: Tolerance = FIT_TOL

    def __post_init__(self):
        object.__setattr__(self, "true_link", get_link(self.true_link))
        for name in ("true_theta", "true_nu", "true_eta"):
            object.__setattr__(self, name, tuple(float(v) for v in getattr(self, name)))
        if (len(self.true_theta), len(self.true_nu), len(self.true_eta)) != (3, 3, 2):
            raise DomainError("scenario coefficients must have lengths (3, 3, 2)")
        if self.replications < 1:
            raise DomainError("replications must be >= 1")
        if self.n <= 8:
            raise DomainError("n must exceed the number of parameters (8)")
        if not (0 < self.tau < 1):
            raise DomainError("tau must lie in (0, 1)")


def scenario_spec(cfg: ScenarioConfig, link=None) -> ModelSpec:
    """x = (1, t1, t2), z = (1, t1, t2), w = (1, t3)."""
    return ModelSpec(cfg.tau, ("t1", "t2"), ("t1", "t2"), ("t3",),
                     mu_link=get_link(link if link is not None else cfg.true_link))


def true_coefficients(cfg: ScenarioConfig) -> Coefficients:
    return Coefficients(np.array(cfg.true_theta), np.array(cfg.true_nu), np.array(cfg.true_eta))


def replication_rngs(seed: int, count: int) -> list[np.random.Generator]:
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(count)]


def simulate_response(spec: ModelSpec, coefs: Coefficients, covariates: Dataset,
                      rng: np.random.Generator) -> tuple[np.ndarray, int]:
    """Draw y_i ~ GB3 at the rows of ``covariates``; returns (y, n_clipped)."""
    mu, alpha, beta = predictors(spec, covariates, coefs)
    lam = lambda_rows(spec.tau, mu, alpha, beta)
    y = np.asarray(gb3_rvs(lam, alpha, beta, rng, size=mu.shape), dtype=float)
    clipped = int(np.sum((y < Y_CLIP) | (y > 1 - Y_CLIP)))
    return np.clip(y, Y_CLIP, 1 - Y_CLIP), clipped


def _placeholder(cov: np.ndarray, names) -> Dataset:
    return Dataset(np.full(cov.shape[0], 0.5), cov, names)


def simulate_dataset(cfg: ScenarioConfig, rng: np.random.Generator) -> Dataset:
    """Covariates t1, t2, t3 i.i.d. N(0, 1) and a GB3 response from the true model."""
    cov = rng.standard_normal((cfg.n, 3))
    names = ("t1", "t2", "t3")
    y, _ = simulate_response(scenario_spec(cfg), true_coefficients(cfg), _placeholder(cov, names), rng)
    return Dataset(y, cov, names)


def true_quantiles(cfg: ScenarioConfig, data: Dataset) -> np.ndarray:
    return predictors(scenario_spec(cfg), data, true_coefficients(cfg))[0]


# --------------------------------------------------------------------------
# Parallel driver
# --------------------------------------------------------------------------


def _run(task: Callable, args: Sequence, workers: int | None):
    if workers is None:
        workers = os.cpu_count() or 1
    if workers <= 1 or len(args) <= 1:
        return [task(a) for a in args]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(task, args, chunksize=max(1, len(args) // (4 * workers))))


# --------------------------------------------------------------------------
# Parameter recovery
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class RecoveryReport:
    labels: tuple[str, ...]
    truth: np.ndarray
    bias: np.ndarray
    mean_se: np.ndarray
    rmse: np.ndarray
    cp95: np.ndarray
    n_used: int
    n_dropped: int
    n: int
    tau: float
    link: str

    @property
    def drop_rate(self) -> float:
        return self.n_dropped / (self.n_used + self.n_dropped)

    def rows(self) -> list[dict]:
        return [
            {"parameter": lab, "n": self.n, "tau": self.tau, "link": self.link,
             "true": float(t), "bias": float(b), "se": float(s), "rmse": float(r),
             "cp": float(c)}
            for lab, t, b, s, r, c in zip(self.labels, self.truth, self.bias, self.mean_se,
                                          self.rmse, self.cp95)
        ]

    def write_csv(self, fh) -> None:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["parameter", "n", "tau", "link", "true", "bias", "se", "rmse", "cp",
                    "replications_used", "replications_dropped"])
        for r in self.rows():
            w.writerow([r["parameter"], r["n"], repr(r["tau"]), r["link"], repr(r["true"]),
                        repr(r["bias"]), repr(r["se"]), repr(r["rmse"]), repr(r["cp"]),
                        self.n_used, self.n_dropped])


def _param_labels(spec: ModelSpec) -> tuple[str, ...]:
    sym = {"mu": "theta", "alpha": "nu", "beta": "eta"}
    out = []
    for comp in ("mu", "alpha", "beta"):
        out += [f"{sym[comp]}{j}" for j in range(len(spec.terms(comp)))]
    return tuple(out)


def _recovery_one(args):
    cfg, rng = args
    data = simulate_dataset(cfg, rng)
    fr = fit(scenario_spec(cfg), data, tol=cfg.tol)
    if not (fr.converged and fr.se_available):
        return None
    return fr.estimates(), fr.std_errors.vector()


def recovery_study(cfg: ScenarioConfig, workers: int | None = 1) -> RecoveryReport:
    """Bias, mean SE, RMSE and 95% Wald coverage of the true-link fit.

    Replications that fail to converge or lack standard errors are dropped
    and counted.
    """
    rngs = replication_rngs(cfg.seed, cfg.replications)
    results = _run(_recovery_one, [(cfg, r) for r in rngs], workers)
    kept = [r for r in results if r is not None]
    truth = true_coefficients(cfg).vector()
    spec = scenario_spec(cfg)
    p = truth.size
    if not kept:
        nan = np.full(p, np.nan)
        return RecoveryReport(_param_labels(spec), truth, nan, nan, nan, nan, 0,
                              len(results), cfg.n, cfg.tau, cfg.true_link.kind)
    est = np.array([r[0] for r in kept])
    se = np.array([r[1] for r in kept])
    err = est - truth
    crit = normal_quantile(0.975)
    covered = np.abs(err) <= crit * se
    return RecoveryReport(
        labels=_param_labels(spec),
        truth=truth,
        bias=err.mean(axis=0),
        mean_se=se.mean(axis=0),
        rmse=np.sqrt((err * err).mean(axis=0)),
        cp95=covered.mean(axis=0),
        n_used=len(kept),
        n_dropped=len(results) - len(kept),
        n=cfg.n,
        tau=cfg.tau,
        link=cfg.true_link.kind,
    )


# --------------------------------------------------------------------------
# Link choice
# --------------------------------------------------------------------------

CRITERIA = ("LL", "MSPE", "MAPE")


@dataclass(frozen=True, eq=False)
class LinkChoiceReport:
    true_link: str
    n: int
    tau: float
    links: tuple[str, ...]
    percentages: dict[str, dict[str, float]]
    counts: dict[str, dict[str, int]]
    n_used: int
    n_dropped: int

    @property
    def drop_rate(self) -> float:
        return self.n_dropped / (self.n_used + self.n_dropped)

    def write_csv(self, fh) -> None:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["true_link", "n", "tau", "criterion", *self.links,
                    "replications_used", "replications_dropped"])
        for crit in CRITERIA:
            w.writerow([self.true_link, self.n, repr(self.tau), crit,
                        *(repr(self.percentages[crit][lk]) for lk in self.links),
                        self.n_used, self.n_dropped])


def _link_one(args):
    cfg, rng, links = args
    data = simulate_dataset(cfg, rng)
    truth = true_quantiles(cfg, data)
    ll, mspe, mape = [], [], []
    for lk in links:
        fr = fit(scenario_spec(cfg, lk), data, tol=cfg.tol)
        if not fr.converged:
            return None
        est = predictors(fr.spec, data, fr.coefficients)[0]
        e2, e1 = prediction_errors(truth, est)
        ll.append(fr.loglik)
        mspe.append(e2)
        mape.append(e1)
    # first index wins exact ties, so the ordering of ``links`` is the tie-break
    return int(np.argmax(ll)), int(np.argmin(mspe)), int(np.argmin(mape))


def link_choice_study(cfg: ScenarioConfig, links: Sequence[str] = UNIT_LINKS,
                      workers: int | None = 1) -> LinkChoiceReport:
    """Fit every candidate link to each replication and tally the winners.

    A replication is dropped (and counted) when any candidate fit fails to
    converge, so each criterion's percentages are taken over the same set.
    """
    links = tuple(get_link(lk).kind for lk in links)
    rngs = replication_rngs(cfg.seed, cfg.replications)
    results = _run(_link_one, [(cfg, r, links) for r in rngs], workers)
    kept = [r for r in results if r is not None]
    counts = {c: {lk: 0 for lk in links} for c in CRITERIA}
    for r in kept:
        for c, idx in zip(CRITERIA, r):
            counts[c][links[idx]] += 1
    total = len(kept)
    pct = {c: {lk: (100.0 * counts[c][lk] / total if total else math.nan) for lk in links}
           for c in CRITERIA}
    return LinkChoiceReport(cfg.true_link.kind, cfg.n, cfg.tau, links, pct, counts,
                            total, len(results) - total)


# --------------------------------------------------------------------------
# Residual calibration
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class CalibrationReport:
    ks_statistics: np.ndarray
    p_values: np.ndarray
    level: float
    n_dropped: int

    @property
    def rejection_rate(self) -> float:
        return float(np.mean(self.p_values < self.level)) if self.p_values.size else math.nan


def _calibration_one(args):
    cfg, rng = args
    data = simulate_dataset(cfg, rng)
    fr = fit(scenario_spec(cfg), data, tol=cfg.tol)
    if not fr.converged:
        return None
    r = rq_residuals(fr, data).residuals
    res = stats.kstest(r, "norm")
    return float(res.statistic), float(res.pvalue)


def residual_calibration(cfg: ScenarioConfig, level: float = 0.05,
                         workers: int | None = 1) -> CalibrationReport:
    """Kolmogorov-Smirnov test of the fitted-model quantile residuals against N(0, 1)."""
    rngs = replication_rngs(cfg.seed, cfg.replications)
    results = [r for r in _run(_calibration_one, [(cfg, g) for g in rngs], workers)]
    kept = [r for r in results if r is not None]
    return CalibrationReport(np.array([k[0] for k in kept]), np.array([k[1] for k in kept]),
                             level, len(results) - len(kept))


# --------------------------------------------------------------------------
# Scenario files
# --------------------------------------------------------------------------


def _parse_value(key: str, raw: str, kind):
    raw = raw.strip()
    if key in ("true_theta", "true_nu", "true_eta"):
        return tuple(float(v) for v in raw.replace(",", " ").split())
    if key == "true_link":
        return get_link(raw)
    if key == "tol":
        a, r, m = raw.replace(",", " ").split()
        return Tolerance(float(a), float(r), int(m))
    return kind(raw)


def load_scenario(path) -> ScenarioConfig:
    """Read a flat ``key = value`` scenario file; ``#`` starts a comment."""
    kinds = {"n": int, "tau": float, "replications": int, "seed": int}
    known = {f.name for f in fields(ScenarioConfig)}
    values = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise DomainError(f"{path}:{lineno}: expected 'key = value'")
            key, raw = (s.strip() for s in line.split("=", 1))
            if key not in known:
                raise DomainError(f"{path}:{lineno}: unknown key {key!r}")
            try:
                values[key] = _parse_value(key, raw, kinds.get(key, str))
            except (ValueError, DomainError) as exc:
                raise DomainError(f"{path}:{lineno}: bad value for {key!r}: {exc}") from None
    return ScenarioConfig(**values)


# --------------------------------------------------------------------------
# Synthetic case-fatality-rate data
# --------------------------------------------------------------------------

# Median-quantile fit of the commune data: terms (intercept, ldens, posit, vaccine).
CFR_TRUTH = {
    "theta": (-4.1285, 0.0475, 0.0, 0.0185),
    "nu": (1.7041, 0.3302, -2.3832, 0.0),
    "eta": (3.5249, 0.0, 0.0, 0.0),
}
CFR_TERMS = ("ldens", "posit", "vaccine")


def cfr_like_covariates(n: int, rng: np.random.Generator) -> dict[str, np.ndarray]:
    """Raw commune-like covariates.

    log(dens) ~ N(3.5, 2.6^2) with dens in people per km^2, posit ~ Beta(2, 10)
    as a positivity fraction, vaccine ~ N(45, 3.2^2) in percent.  The spreads
    were calibrated so that the reduced median model's slope standard errors
    land close to those of real commune-level fits.
    """
    ldens = rng.normal(3.5, 2.6, n)
    posit = np.clip(rng.beta(2.0, 10.0, n), 0.005, 0.6)
    vaccine = np.clip(rng.normal(45.0, 3.2, n), 5.0, 99.5)
    return {"dens": np.exp(ldens), "posit": posit, "vaccine": vaccine}


def cfr_full_spec(tau: float = 0.5, link="logit") -> ModelSpec:
    return ModelSpec(tau, CFR_TERMS, CFR_TERMS, CFR_TERMS, mu_link=get_link(link))


def simulate_cfr_like(n: int, rng: np.random.Generator, tau: float = 0.5,
                      truth: dict | None = None) -> tuple[Dataset, dict[str, np.ndarray]]:
    """Synthetic case-fatality data from the full three-covariate model.

    Returns the modelling dataset (columns ldens, posit, vaccine) and the raw
    columns (cfr, dens, posit, vaccine) for CSV export.
    """
    truth = CFR_TRUTH if truth is None else truth
    raw = cfr_like_covariates(n, rng)
    cov = np.column_stack([np.log(raw["dens"]), raw["posit"], raw["vaccine"]])
    spec = cfr_full_spec(tau)
    coefs = Coefficients(np.array(truth["theta"]), np.array(truth["nu"]), np.array(truth["eta"]))
    y, _ = simulate_response(spec, coefs, _placeholder(cov, CFR_TERMS), rng)
    return Dataset(y, cov, CFR_TERMS), {"cfr": y, **raw}
