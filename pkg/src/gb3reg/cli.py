"""Command-line interface.

Subcommands: fit, residuals, select, simulate-recovery, simulate-links,
pdf-grid and sample.  Reports are JSON or CSV; failures print a JSON error
object on stderr and exit non-zero.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from . import __version__, specfun
from .diagnostics import (
    latent_mean_change,
    pct_change_approx,
    pct_change_exact,
    rq_residuals,
    table_rows,
)
from .gb3 import Gb3Params, QuantileGb3Params, gb3_pdf, gb3_sample
from .links import LINK_NAMES, UNIT_LINKS, get_link
from .regression import FIT_TOL, INTERCEPT, Dataset, FitResult, ModelSpec, fit
from .selection import backward_eliminate
from .simulation import (
    ScenarioConfig,
    link_choice_study,
    load_scenario,
    recovery_study,
    replication_rngs,
    simulate_cfr_like,
    simulate_dataset,
)
from .specfun import DomainError, Tolerance

GRID_POINTS = 512
EXIT_USAGE = 2
EXIT_FAILURE = 1


class CliError(Exception):
    """A user-facing failure with an optional input location."""

    def __init__(self, message: str, location: str | None = None, kind: str = "input_error"):
        super().__init__(message)
        self.location = location
        self.kind = kind


# --------------------------------------------------------------------------
# Serialization helpers
# --------------------------------------------------------------------------


def _clean(obj):
    """Make a structure JSON-safe: numpy scalars to Python, non-finite to null."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_clean(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


def dumps(obj) -> str:
    # float repr is the shortest string that round-trips exactly
    return json.dumps(_clean(obj), indent=2, sort_keys=False, allow_nan=False) + "\n"


def _open_out(path):
    if path in (None, "-"):
        return _Stdout()
    try:
        return open(path, "w", newline="")
    except OSError as exc:
        raise CliError(f"cannot write output: {exc.strerror}", location=str(path)) from None


class _Stdout:
    def __enter__(self):
        return sys.stdout

    def __exit__(self, *exc):
        sys.stdout.flush()
        return False


# --------------------------------------------------------------------------
# Data ingestion
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class IngestedData:
    dataset: Dataset
    path: str
    sha256: str
    response: str
    log_columns: tuple[str, ...]


def ingest_csv(path, response: str, log_columns=()) -> IngestedData:
    """Read a headed CSV file into a Dataset.

    Every numeric column other than ``response`` becomes a covariate.
    Columns listed in ``log_columns`` are replaced by their natural log.
    Errors name the file, the 1-based line number and the column.
    """
    path = str(path)
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        raise CliError(f"cannot read input: {exc.strerror}", location=path) from None
    digest = hashlib.sha256(raw).hexdigest()
    try:
        text = raw.decode("utf-8-sig")
    except UnicodeDecodeError:
        raise CliError("input is not valid UTF-8", location=path) from None
    rows = list(csv.reader(io.StringIO(text)))
    while rows and not any(c.strip() for c in rows[-1]):
        rows.pop()
    if not rows:
        raise CliError("file is empty", location=path)
    header = [h.strip() for h in rows[0]]
    if len(set(header)) != len(header):
        raise CliError("duplicate column names in header", location=f"{path}:line 1")
    if response not in header:
        raise CliError(f"response column {response!r} not found in header",
                       location=f"{path}:line 1")
    for col in log_columns:
        if col not in header:
            raise CliError(f"--log column {col!r} not found in header", location=f"{path}:line 1")
        if col == response:
            raise CliError("the response cannot be log-transformed", location=f"{path}:line 1")
    body = rows[1:]
    if not body:
        raise CliError("file has a header but no data rows", location=path)
    values = np.empty((len(body), len(header)))
    for r, row in enumerate(body):
        line = r + 2
        if len(row) != len(header):
            raise CliError(f"expected {len(header)} fields, found {len(row)}",
                           location=f"{path}:line {line}")
        for c, cell in enumerate(row):
            try:
                v = float(cell)
            except ValueError:
                raise CliError(f"non-numeric value {cell!r}",
                               location=f"{path}:line {line}, column {header[c]!r}") from None
            if not math.isfinite(v):
                raise CliError(f"non-finite value {cell!r}",
                               location=f"{path}:line {line}, column {header[c]!r}")
            values[r, c] = v
    yi = header.index(response)
    y = values[:, yi]
    bad = np.flatnonzero(~((y > 0) & (y < 1)))
    if bad.size:
        r = int(bad[0])
        raise CliError(f"response {y[r]!r} outside the open interval (0, 1)",
                       location=f"{path}:line {r + 2}, column {response!r}")
    names = [h for i, h in enumerate(header) if i != yi]
    cov = np.delete(values, yi, axis=1)
    for col in log_columns:
        j = names.index(col)
        bad = np.flatnonzero(~(cov[:, j] > 0))
        if bad.size:
            r = int(bad[0])
            raise CliError(f"cannot take the log of {cov[r, j]!r}",
                           location=f"{path}:line {r + 2}, column {col!r}")
        cov[:, j] = np.log(cov[:, j])
    try:
        ds = Dataset(y, cov, tuple(names))
    except DomainError as exc:
        raise CliError(str(exc), location=path) from None
    return IngestedData(ds, path, digest, response, tuple(log_columns))


# --------------------------------------------------------------------------
# Model construction
# --------------------------------------------------------------------------


def _terms(arg, data: Dataset, flag: str) -> tuple[str, ...]:
    if arg is None:
        return data.names
    terms = tuple(t.strip() for t in arg.split(",") if t.strip())
    for t in terms:
        if t not in data.names:
            raise CliError(f"unknown covariate {t!r}; available: {', '.join(data.names)}",
                           location=flag)
    return terms


def _taus(args) -> list[float]:
    taus = args.tau or [0.5]
    for t in taus:
        if not (0 < t < 1):
            raise CliError(f"tau {t!r} outside (0, 1)", location="--tau")
    if len(set(taus)) != len(taus):
        raise CliError("repeated --tau values", location="--tau")
    return taus


def _spec(args, data: Dataset, tau: float) -> ModelSpec:
    try:
        return ModelSpec(
            tau,
            _terms(args.mu_terms, data, "--mu-terms"),
            _terms(args.alpha_terms, data, "--alpha-terms"),
            _terms(args.beta_terms, data, "--beta-terms"),
            mu_link=get_link(args.link),
        )
    except DomainError as exc:
        raise CliError(str(exc), location="model flags") from None


def _column_means(data: Dataset) -> dict[str, float]:
    return {n: float(np.mean(data.column(n))) for n in data.names}


def fit_report(fr: FitResult, data: Dataset) -> dict:
    """JSON-ready report of one fit."""
    means = _column_means(data)
    effects = []
    link = fr.spec.mu_link.kind
    theta = dict(zip(fr.spec.terms("mu"), fr.coefficients.theta))
    for term, coef in theta.items():
        if term == INTERCEPT:
            continue
        effects.append({
            "component": "mu",
            "term": term,
            "pct_change_exact_at_means": pct_change_exact(fr, means, term),
            "pct_change_approx": pct_change_approx(coef, link, "negexp"),
            "pct_change_taylor": pct_change_approx(coef, link, "taylor"),
        })
    for comp, vec in (("alpha", fr.coefficients.nu), ("beta", fr.coefficients.eta)):
        for term, coef in zip(fr.spec.terms(comp), vec):
            if term != INTERCEPT:
                effects.append({"component": comp, "term": term,
                                "latent_mean_pct_change": latent_mean_change(coef)})
    return {
        "tau": fr.tau,
        "link": link,
        "n_obs": fr.n_obs,
        "n_params": fr.n_params,
        "terms": {c: list(fr.spec.terms(c)) for c in ("mu", "alpha", "beta")},
        "coefficients": table_rows(fr),
        "loglik": fr.loglik,
        "aic": fr.aic,
        "bic": fr.bic,
        "convergence": {
            "converged": fr.converged,
            "iterations": fr.n_iter,
            "gradient_norm": fr.gradient_norm,
            "standard_errors": fr.se_available,
            "message": fr.message,
        },
        "effects": effects,
        "effects_evaluated_at": means,
    }


def _dataset_block(ing: IngestedData) -> dict:
    return {"path": ing.path, "sha256": ing.sha256, "n": ing.dataset.n,
            "response": ing.response, "covariates": list(ing.dataset.names),
            "log_transformed": list(ing.log_columns)}


def _map(func, items, workers):
    workers = workers if workers is not None else (os.cpu_count() or 1)
    if workers <= 1 or len(items) <= 1:
        return [func(i) for i in items]
    with ProcessPoolExecutor(max_workers=min(workers, len(items))) as pool:
        return list(pool.map(func, items))


def _tolerance(args) -> Tolerance:
    vals = {"abs_tol": args.abs_tol, "rel_tol": args.rel_tol, "max_iter": args.max_iter}
    try:
        return replace(FIT_TOL, **{k: v for k, v in vals.items() if v is not None})
    except DomainError as exc:
        raise CliError(str(exc), location="--abs-tol/--rel-tol/--max-iter") from None


def _fit_one(job):
    spec, data, tol = job
    fr = fit(spec, data, tol=tol)
    return fit_report(fr, data)


def _select_one(job):
    spec, data, threshold, tol = job
    trace = backward_eliminate(spec, data, threshold=threshold, tol=tol)
    out = trace.to_dict()
    out["tau"] = spec.tau
    out["link"] = spec.mu_link.kind
    out["final_report"] = fit_report(trace.final_fit, data)
    return out


# --------------------------------------------------------------------------
# Commands
# --------------------------------------------------------------------------


def run_fit(args) -> int:
    ing = ingest_csv(args.input, args.response, args.log)
    tol = _tolerance(args)
    jobs = [(_spec(args, ing.dataset, t), ing.dataset, tol) for t in _taus(args)]
    reports = _map(_fit_one, jobs, args.workers)
    with _open_out(args.out) as fh:
        fh.write(dumps({"command": "fit", "version": __version__,
                        "dataset": _dataset_block(ing), "fits": reports}))
    return 0


def run_residuals(args) -> int:
    ing = ingest_csv(args.input, args.response, args.log)
    taus = _taus(args)
    if len(taus) != 1:
        raise CliError("residuals takes exactly one --tau", location="--tau")
    fr = fit(_spec(args, ing.dataset, taus[0]), ing.dataset, tol=_tolerance(args))
    rep = rq_residuals(fr, ing.dataset)
    with _open_out(args.out) as fh:
        rep.write_csv(fh)
    return 0


def run_select(args) -> int:
    ing = ingest_csv(args.input, args.response, args.log)
    if not (0 < args.threshold < 1):
        raise CliError("threshold must lie in (0, 1)", location="--threshold")
    tol = _tolerance(args)
    jobs = [(_spec(args, ing.dataset, t), ing.dataset, args.threshold, tol)
            for t in _taus(args)]
    traces = _map(_select_one, jobs, args.workers)
    with _open_out(args.out) as fh:
        fh.write(dumps({"command": "select", "version": __version__,
                        "dataset": _dataset_block(ing), "threshold": args.threshold,
                        "selections": traces}))
    return 0


def _scenario(args) -> ScenarioConfig:
    try:
        cfg = load_scenario(args.scenario) if args.scenario else ScenarioConfig()
    except OSError as exc:
        raise CliError(f"cannot read scenario: {exc.strerror}", location=args.scenario) from None
    except DomainError as exc:
        raise CliError(str(exc), location=args.scenario) from None
    updates = {}
    if args.tau:
        if len(args.tau) != 1:
            raise CliError("simulation commands take one --tau", location="--tau")
        updates["tau"] = args.tau[0]
    if args.link:
        updates["true_link"] = get_link(args.link)
    if args.reps is not None:
        updates["replications"] = args.reps
    if args.seed is not None:
        updates["seed"] = args.seed
    if any(v is not None for v in (args.abs_tol, args.rel_tol, args.max_iter)):
        updates["tol"] = _tolerance(args)
    try:
        return replace(cfg, **updates)
    except DomainError as exc:
        raise CliError(str(exc), location="simulation flags") from None


def _sizes(args, cfg) -> list[int]:
    sizes = args.n or [cfg.n]
    for n in sizes:
        if n <= 8:
            raise CliError(f"sample size {n} too small", location="--n")
    return sizes


def run_simulations(args) -> int:
    cfg = _scenario(args)
    sizes = _sizes(args, cfg)
    with _open_out(args.out) as fh:
        header_done = False
        for n in sizes:
            c = replace(cfg, n=n)
            if args.command == "simulate-recovery":
                rep = recovery_study(c, workers=args.workers)
            else:
                rep = link_choice_study(c, workers=args.workers)
            buf = io.StringIO()
            rep.write_csv(buf)
            lines = buf.getvalue().splitlines(keepends=True)
            fh.write("".join(lines if not header_done else lines[1:]))
            header_done = True
    return 0


def _parse_combo(text: str, tau: float) -> tuple[str, Gb3Params]:
    try:
        kv = dict(item.split("=", 1) for item in text.split(","))
        kv = {k.strip(): float(v) for k, v in kv.items()}
    except ValueError:
        raise CliError(f"cannot parse {text!r}; expected e.g. lam=0.5,alpha=2,beta=3",
                       location="--combo") from None
    try:
        if set(kv) == {"lam", "alpha", "beta"}:
            p = Gb3Params(kv["lam"], kv["alpha"], kv["beta"])
        elif set(kv) == {"mu", "alpha", "beta"}:
            p = QuantileGb3Params(kv["mu"], kv["alpha"], kv["beta"], tau).to_classical()
        else:
            raise CliError(f"{text!r} must give lam,alpha,beta or mu,alpha,beta",
                           location="--combo")
    except DomainError as exc:
        raise CliError(str(exc), location=f"--combo {text}") from None
    return text, p


DEFAULT_COMBOS = (
    "lam=0.25,alpha=2,beta=2",
    "lam=1,alpha=2,beta=2",
    "lam=4,alpha=2,beta=2",
    "lam=0.5,alpha=3,beta=1.5",
    "lam=2,alpha=1.5,beta=3",
)


def pdf_grid() -> np.ndarray:
    """512 equally spaced points spanning [0, 1], endpoints included."""
    return np.linspace(0.0, 1.0, GRID_POINTS)


def _edge_density(shape: float, scale: float) -> float:
    # limit of scale * t^(shape-1) as t -> 0+
    if shape > 1.0:
        return 0.0
    return scale if shape == 1.0 else math.inf


def grid_density(y: np.ndarray, p) -> np.ndarray:
    """Density on the grid, with the endpoint values taken as one-sided limits."""
    out = np.empty_like(y)
    inner = (y > 0.0) & (y < 1.0)
    out[inner] = gb3_pdf(y[inner], p)
    # at 0 the density is lam^a y^(a-1) / B; at 1 it is lam^-b (1-y)^(b-1) / B
    inv_b = math.exp(-specfun.log_beta(p.alpha, p.beta))
    out[y == 0.0] = _edge_density(p.alpha, p.lam ** p.alpha * inv_b)
    out[y == 1.0] = _edge_density(p.beta, p.lam ** -p.beta * inv_b)
    return out


def run_pdf_grid(args) -> int:
    tau = _taus(args)[0] if args.tau else 0.5
    combos = [_parse_combo(c, tau) for c in (args.combo or DEFAULT_COMBOS)]
    y = pdf_grid()
    with _open_out(args.out) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["combo", "lam", "alpha", "beta", "y", "density"])
        for label, p in combos:
            dens = grid_density(y, p)
            for yy, d in zip(y, dens):
                w.writerow([label, repr(p.lam), repr(p.alpha), repr(p.beta),
                            repr(float(yy)), repr(float(d))])
    return 0


def run_sample(args) -> int:
    seed = 0 if args.seed is None else args.seed
    rng = replication_rngs(seed, 1)[0]
    n = (args.n or [305])[0]
    with _open_out(args.out) as fh:
        w = csv.writer(fh, lineterminator="\n")
        if args.cfr_like:
            tau = _taus(args)[0] if args.tau else 0.5
            _, raw = simulate_cfr_like(n, rng, tau=tau)
            cols = ["cfr", "dens", "posit", "vaccine"]
            w.writerow(cols)
            for row in zip(*(raw[c] for c in cols)):
                w.writerow([repr(float(v)) for v in row])
        elif args.combo:
            if len(args.combo) != 1:
                raise CliError("sample takes one --combo", location="--combo")
            tau = _taus(args)[0] if args.tau else 0.5
            _, p = _parse_combo(args.combo[0], tau)
            w.writerow(["y"])
            for v in np.atleast_1d(gb3_sample(p, rng, size=n)):
                w.writerow([repr(float(v))])
        else:
            cfg = _scenario(args)
            data = simulate_dataset(replace(cfg, n=n), rng)
            w.writerow(["y", *data.names])
            for yy, row in zip(data.y, data.covariates):
                w.writerow([repr(float(yy)), *(repr(float(v)) for v in row)])
    return 0


# --------------------------------------------------------------------------
# Argument parsing
# --------------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError(message, location="command line", kind="usage_error")


def _add_tol_flags(p):
    p.add_argument("--abs-tol", type=float, help="gradient tolerance (default: {})"
                   .format(FIT_TOL.abs_tol))
    p.add_argument("--rel-tol", type=float, help="relative log-likelihood tolerance "
                   "(default: {})".format(FIT_TOL.rel_tol))
    p.add_argument("--max-iter", type=int, help="iteration cap (default: {})"
                   .format(FIT_TOL.max_iter))


def _add_model_flags(p):
    p.add_argument("--input", required=True, help="CSV file with a header row")
    p.add_argument("--response", required=True, help="response column, values in (0, 1)")
    p.add_argument("--mu-terms", help="comma-separated quantile covariates (default: all)")
    p.add_argument("--alpha-terms", help="comma-separated alpha covariates (default: all)")
    p.add_argument("--beta-terms", help="comma-separated beta covariates (default: all)")
    p.add_argument("--tau", type=float, action="append", help="quantile level (repeatable)")
    p.add_argument("--link", default="logit", choices=UNIT_LINKS, help="quantile link")
    p.add_argument("--log", action="append", default=[], metavar="COL",
                   help="replace a covariate by its natural log (repeatable)")
    p.add_argument("--out", help="output file (default: stdout)")
    p.add_argument("--workers", type=int, help="worker processes (default: all cores)")
    _add_tol_flags(p)


def _add_sim_flags(p):
    p.add_argument("--scenario", help="flat key = value scenario file")
    p.add_argument("--n", type=int, action="append", help="sample size (repeatable)")
    p.add_argument("--tau", type=float, action="append", help="quantile level")
    p.add_argument("--link", choices=UNIT_LINKS, help="true quantile link")
    p.add_argument("--reps", type=int, help="replications")
    p.add_argument("--seed", type=int, help="scenario seed")
    p.add_argument("--out", help="output CSV (default: stdout)")
    p.add_argument("--workers", type=int, help="worker processes (default: all cores)")
    _add_tol_flags(p)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="gb3reg", description="GB3 quantile regression for unit-interval data")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("fit", help="fit the model at one or more quantile levels")
    _add_model_flags(p)
    p.set_defaults(func=run_fit)

    p = sub.add_parser("residuals", help="export quantile residuals and QQ coordinates")
    _add_model_flags(p)
    p.set_defaults(func=run_residuals)

    p = sub.add_parser("select", help="backward elimination by Wald p-values")
    _add_model_flags(p)
    p.add_argument("--threshold", type=float, default=0.05, help="p-value threshold")
    p.set_defaults(func=run_select)

    p = sub.add_parser("simulate-recovery", help="parameter recovery study")
    _add_sim_flags(p)
    p.set_defaults(func=run_simulations)

    p = sub.add_parser("simulate-links", help="link-choice study")
    _add_sim_flags(p)
    p.set_defaults(func=run_simulations)

    p = sub.add_parser("pdf-grid", help="densities on a 512-point grid")
    p.add_argument("--combo", action="append",
                   help="lam=..,alpha=..,beta=.. or mu=..,alpha=..,beta=.. (repeatable)")
    p.add_argument("--tau", type=float, action="append", help="level for mu= combos")
    p.add_argument("--out", help="output CSV (default: stdout)")
    p.set_defaults(func=run_pdf_grid)

    p = sub.add_parser("sample", help="draw synthetic data")
    _add_sim_flags(p)
    p.add_argument("--cfr-like", action="store_true",
                   help="case-fatality-like columns cfr, dens, posit, vaccine")
    p.add_argument("--combo", action="append", help="draw y only from one GB3 law")
    p.set_defaults(func=run_sample)
    return parser


def _emit_error(kind: str, message: str, location: str | None) -> None:
    payload = {"error": kind, "message": message}
    if location is not None:
        payload["location"] = location
    sys.stderr.write(json.dumps(payload) + "\n")


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return args.func(args)
    except CliError as exc:
        _emit_error(exc.kind, str(exc), exc.location)
        return EXIT_USAGE if exc.kind == "usage_error" else EXIT_FAILURE
    except DomainError as exc:
        _emit_error("domain_error", str(exc), None)
        return EXIT_FAILURE
    except Exception as exc:  # last resort: still machine-readable
        _emit_error(type(exc).__name__, str(exc), None)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
