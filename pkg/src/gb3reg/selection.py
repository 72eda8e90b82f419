"""Backward elimination of covariates across the three predictors."""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import asdict, dataclass, field

from .regression import (
    COMPONENTS,
    FIT_TOL,
    INTERCEPT,
    Coefficients,
    Dataset,
    EvaluationError,
    FitResult,
    ModelSpec,
    fit,
    wald_inference,
)
from .specfun import DomainError, Tolerance

__all__ = ["EliminationStep", "EliminationTrace", "backward_eliminate", "best_subset"]

# beta terms go first on exact p-value ties, then alpha, then mu
_TIE_RANK = {"beta": 2, "alpha": 1, "mu": 0}


@dataclass(frozen=True)
class EliminationStep:
    component: str
    term: str
    p_value: float
    loglik: float
    aic: float
    bic: float


@dataclass(eq=False)
class EliminationTrace:
    initial_fit: FitResult
    final_spec: ModelSpec
    final_fit: FitResult
    steps: list[EliminationStep] = field(default_factory=list)
    aborted: bool = False
    message: str = ""

    def logliks(self) -> list[float]:
        return [self.initial_fit.loglik] + [s.loglik for s in self.steps]

    def removed(self) -> list[tuple[str, str]]:
        return [(s.component, s.term) for s in self.steps]

    def selected_terms(self) -> dict[str, tuple[str, ...]]:
        return {c: self.final_spec.terms(c) for c in COMPONENTS}

    def to_dict(self) -> dict:
        return {
            "threshold_met": not self.aborted,
            "message": self.message,
            "initial": {"loglik": self.initial_fit.loglik, "aic": self.initial_fit.aic,
                        "bic": self.initial_fit.bic},
            "steps": [asdict(s) for s in self.steps],
            "final_terms": {c: list(t) for c, t in self.selected_terms().items()},
            "final": {"loglik": self.final_fit.loglik, "aic": self.final_fit.aic,
                      "bic": self.final_fit.bic, "converged": self.final_fit.converged},
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)

    def table(self) -> str:
        lines = [f"{'step':>4}  {'component':<9} {'term':<16} {'p-value':>10} "
                 f"{'loglik':>12} {'AIC':>12} {'BIC':>12}",
                 f"{0:>4}  {'(full)':<9} {'':<16} {'':>10} {self.initial_fit.loglik:>12.6g} "
                 f"{self.initial_fit.aic:>12.6g} {self.initial_fit.bic:>12.6g}"]
        for i, s in enumerate(self.steps, 1):
            lines.append(f"{i:>4}  {s.component:<9} {s.term:<16} {s.p_value:>10.4g} "
                         f"{s.loglik:>12.6g} {s.aic:>12.6g} {s.bic:>12.6g}")
        return "\n".join(lines)


def _candidate(fr: FitResult):
    """Removable term with the largest Wald p-value (deterministic tie-break)."""
    spec = fr.spec
    best = None
    rows = wald_inference(fr)
    position = {}
    for comp in COMPONENTS:
        for i, t in enumerate(spec.terms(comp)):
            position[(comp, t)] = i
    for row in rows:
        if row.term == INTERCEPT:
            continue
        if len(spec.terms(row.component)) == 1:
            continue  # predictor would become empty
        if not math.isfinite(row.p_value):
            raise EvaluationError(f"p-value unavailable for {row.component}:{row.term}")
        key = (row.p_value, _TIE_RANK[row.component], position[(row.component, row.term)])
        if best is None or key > best[0]:
            best = (key, row)
    return None if best is None else best[1]


def _warm_start(fr: FitResult, new_spec: ModelSpec) -> Coefficients:
    old = dict(zip(fr.spec.coef_labels(), fr.coefficients.vector()))
    return Coefficients.from_vector(new_spec, [old[lab] for lab in new_spec.coef_labels()])


def backward_eliminate(
    spec: ModelSpec,
    data: Dataset,
    threshold: float = 0.05,
    tol: Tolerance = FIT_TOL,
    init: Coefficients | None = None,
) -> EliminationTrace:
    """Drop the least significant non-intercept term until every p-value <= threshold.

    Each refit is warm-started from the surviving coefficients of the
    previous fit.  A non-converged refit stops the procedure; the trace up
    to that point is returned with ``aborted=True``.
    """
    if not (0 < threshold < 1):
        raise DomainError("threshold must lie in (0, 1)")
    current = fit(spec, data, init=init, tol=tol)
    trace = EliminationTrace(initial_fit=current, final_spec=spec, final_fit=current)
    if not (current.converged and current.se_available):
        trace.aborted = True
        trace.message = f"full model fit failed: {current.message}"
        return trace
    while True:
        try:
            row = _candidate(current)
        except EvaluationError as exc:
            trace.aborted = True
            trace.message = str(exc)
            return trace
        if row is None or row.p_value <= threshold:
            trace.message = "all remaining terms significant"
            return trace
        new_spec = current.spec.drop(row.component, row.term)
        try:
            refit = fit(new_spec, data, init=_warm_start(current, new_spec), tol=tol)
        except EvaluationError:
            # surviving coefficients can leave the shape predictors out of range
            refit = fit(new_spec, data, tol=tol)
        if not (refit.converged and refit.se_available):
            trace.aborted = True
            trace.message = (f"refit after removing {row.component}:{row.term} failed: "
                             f"{refit.message}")
            return trace
        trace.steps.append(EliminationStep(row.component, row.term, row.p_value,
                                           refit.loglik, refit.aic, refit.bic))
        current = refit
        trace.final_spec = new_spec
        trace.final_fit = refit


def best_subset(
    spec: ModelSpec,
    data: Dataset,
    criterion: str = "aic",
    tol: Tolerance = FIT_TOL,
    max_covariates: int = 3,
) -> tuple[FitResult, list[tuple[float, ModelSpec]]]:
    """Exhaustive search over term subsets (small models only).

    Every non-intercept term of ``spec`` is toggled independently, giving
    2^(number of terms) fits.  Returns the best fit under ``criterion`` and
    the full (criterion value, spec) list sorted ascending.
    """
    if criterion not in ("aic", "bic"):
        raise DomainError("criterion must be 'aic' or 'bic'")
    covs = {t for c in COMPONENTS for t in getattr(spec, f"{c}_terms")}
    if len(covs) > max_covariates:
        raise DomainError(f"exhaustive search limited to {max_covariates} covariates")
    slots = [(c, t) for c in COMPONENTS for t in getattr(spec, f"{c}_terms")]
    results = []
    best = None
    for mask in itertools.product((False, True), repeat=len(slots)):
        keep = {c: tuple(t for (cc, t), on in zip(slots, mask) if on and cc == c)
                for c in COMPONENTS}
        try:
            sub = ModelSpec(spec.tau, keep["mu"], keep["alpha"], keep["beta"],
                            spec.mu_link, spec.shape_link, spec.mu_intercept,
                            spec.alpha_intercept, spec.beta_intercept)
        except DomainError:
            continue
        fr = fit(sub, data, tol=tol)
        if not fr.converged:
            continue
        value = getattr(fr, criterion)
        results.append((value, sub))
        if best is None or value < getattr(best, criterion):
            best = fr
    if best is None:
        raise EvaluationError("no candidate model converged")
    results.sort(key=lambda r: r[0])
    return best, results
