import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from oracles import richardson_gradient, richardson_hessian
from scipy import stats

from gb3reg.gb3 import QuantileGb3Params, beta_quantile, qgb3_logpdf
from gb3reg.regression import (
    FIT_TOL,
    INTERCEPT,
    Coefficients,
    Dataset,
    EvaluationError,
    FitResult,
    ModelSpec,
    SingularInformationError,
    covariance_from_information,
    fit,
    fitted_parameters,
    initial_coefficients,
    lambda_rows,
    log_likelihood,
    observed_information,
    pointwise_loglik,
    predictors,
    score,
    wald_inference,
)
from gb3reg.simulation import ScenarioConfig, scenario_spec, simulate_dataset, true_coefficients
from gb3reg.specfun import DomainError, Tolerance


def random_dataset(rng, n=50, names=("x1", "x2", "x3")):
    cov = rng.standard_normal((n, len(names)))
    y = rng.uniform(0.02, 0.98, n)
    return Dataset(y, cov, names)


def random_model(rng, link="logit", tau=None):
    """Random two-covariate model on a 50-row dataset with modest coefficients."""
    data = random_dataset(rng)
    tau = rng.uniform(0.1, 0.9) if tau is None else tau
    spec = ModelSpec(tau, ("x1", "x2"), ("x1",), ("x3",), mu_link=link)
    vec = np.concatenate([rng.normal(0, 0.5, 3), rng.normal(0.5, 0.3, 2), rng.normal(0.5, 0.3, 2)])
    return spec, data, vec


@pytest.fixture(scope="module")
def scenario_fit():
    cfg = ScenarioConfig()
    data = simulate_dataset(cfg, np.random.default_rng(77))
    spec = scenario_spec(cfg)
    return spec, data, fit(spec, data)


class TestDataset:
    def test_valid(self):
        d = Dataset.from_columns([0.2, 0.5, 0.7], {"a": [1, 2, 3]})
        assert d.n == 3 and list(d.column("a")) == [1, 2, 3]
        with pytest.raises(KeyError):
            d.column("b")

    @pytest.mark.parametrize("y", [[0.2, 0.0, 0.5], [0.2, 1.0, 0.5], [0.2, math.nan, 0.5]])
    def test_response_outside_open_interval(self, y):
        with pytest.raises(DomainError):
            Dataset.from_columns(y, {"a": [1, 2, 3]})

    def test_non_finite_covariate(self):
        with pytest.raises(DomainError):
            Dataset.from_columns([0.2, 0.3], {"a": [1.0, math.inf]})

    def test_name_rules(self):
        with pytest.raises(DomainError):
            Dataset(np.array([0.2, 0.3]), np.ones((2, 2)), ("a", "a"))
        with pytest.raises(DomainError):
            Dataset(np.array([0.2, 0.3]), np.ones((2, 1)), (INTERCEPT,))
        with pytest.raises(DomainError):
            Dataset(np.array([0.2, 0.3]), np.ones((2, 2)), ("a",))

    def test_immutable(self):
        d = Dataset.from_columns([0.2, 0.5], {"a": [1, 2]})
        with pytest.raises(ValueError):
            d.y[0] = 0.3


class TestModelSpec:
    def test_terms_and_labels(self):
        s = ModelSpec(0.5, ("a", "b"), ("a",), ())
        assert s.dims == (3, 2, 1)
        assert s.coef_labels()[0] == ("mu", INTERCEPT)
        assert s.drop("mu", "a").mu_terms == ("b",)
        with pytest.raises(KeyError):
            s.drop("beta", "a")

    @pytest.mark.parametrize("kwargs", [
        {"tau": 0.0}, {"tau": 1.0}, {"mu_link": "log"}, {"shape_link": "logit"},
        {"mu_terms": ("a", "a")}, {"beta_intercept": False},
    ])
    def test_invalid(self, kwargs):
        base = {"tau": 0.5}
        base.update(kwargs)
        with pytest.raises(DomainError):
            ModelSpec(**base)

    def test_rank_deficiency_detected(self):
        rng = np.random.default_rng(0)
        x = rng.standard_normal(20)
        d = Dataset(rng.uniform(0.1, 0.9, 20), np.column_stack([x, 2 * x]), ("a", "b"))
        with pytest.raises(DomainError, match="rank"):
            ModelSpec(0.5, ("a", "b")).design(d)

    def test_too_many_parameters(self):
        d = Dataset.from_columns([0.2, 0.4, 0.6], {"a": [1.0, 2.0, 4.0]})
        with pytest.raises(DomainError, match="observations"):
            ModelSpec(0.5, ("a",)).design(d)


class TestPredictors:
    def test_zero_coefficients(self):
        d = random_dataset(np.random.default_rng(1), n=10)
        spec = ModelSpec(0.5, ("x1",), ("x2",), ())
        mu, a, b = predictors(spec, d, Coefficients.zeros(spec))
        assert np.all(mu == 0.5) and np.all(a == 1) and np.all(b == 1)

    def test_intercept_example(self):
        d = random_dataset(np.random.default_rng(1), n=10)
        spec = ModelSpec(0.5)
        mu, _, _ = predictors(spec, d, [-4.1285, 0, 0])
        assert mu[0] == pytest.approx(1 / (1 + math.exp(4.1285)), rel=1e-14)
        assert mu[0] == pytest.approx(0.01586, abs=1e-5)

    def test_single_covariate(self):
        d = Dataset.from_columns([0.3] * 5, {"x": [2.0, 1, 0, -1, 3]})
        spec = ModelSpec(0.5, ("x",))
        mu, _, _ = predictors(spec, d, [0, 1, 0, 0])
        assert mu[0] == pytest.approx(0.8808, abs=1e-4)

    def test_length_mismatch(self):
        d = random_dataset(np.random.default_rng(1), n=10)
        with pytest.raises(DomainError):
            predictors(ModelSpec(0.5), d, [0.0, 0.0])
        with pytest.raises(DomainError):
            predictors(ModelSpec(0.5), d, Coefficients(np.zeros(2), np.zeros(1), np.zeros(1)))


class TestLikelihood:
    def test_hand_example(self):
        d = Dataset.from_columns([0.4] * 4, {})
        spec = ModelSpec(0.5)
        rows = pointwise_loglik(spec, d, [0.0, math.log(2), math.log(2)])
        np.testing.assert_allclose(rows, math.log(1.44), rtol=0, atol=1e-14)

    def test_beta_special_case(self):
        rng = np.random.default_rng(3)
        y = rng.beta(2, 3, 40)
        tau = 0.3
        mu = beta_quantile(tau, 2, 3)
        spec = ModelSpec(tau)
        ll = log_likelihood(spec, Dataset.from_columns(y, {}),
                            [math.log(mu / (1 - mu)), math.log(2), math.log(3)])
        assert ll == pytest.approx(float(np.sum(stats.beta.logpdf(y, 2, 3))), abs=1e-10)

    @pytest.mark.parametrize("link", ["logit", "probit", "loglog", "cloglog"])
    @given(seed=st.integers(0, 2**32 - 1))
    @settings(max_examples=10, deadline=None)
    def test_equals_sum_of_quantile_log_densities(self, link, seed):
        spec, data, vec = random_model(np.random.default_rng(seed), link)
        mu, a, b = predictors(spec, data, vec)
        ref = sum(qgb3_logpdf(yi, QuantileGb3Params(m, ai, bi, spec.tau))
                  for yi, m, ai, bi in zip(data.y, mu, a, b))
        assert log_likelihood(spec, data, vec) == pytest.approx(ref, abs=1e-10)

    def test_non_finite_reported(self):
        spec, data, vec = random_model(np.random.default_rng(4))
        vec[3] = 500.0  # alpha intercept far outside the admissible range
        with pytest.raises(EvaluationError):
            log_likelihood(spec, data, vec)
        with pytest.raises(EvaluationError):
            score(spec, data, vec)

    def test_lambda_rows_matches_definition(self):
        mu, a, b = np.array([0.2, 0.7]), np.array([2.0, 0.5]), np.array([2.0, 3.0])
        lam = lambda_rows(0.5, mu, a, b)
        z = np.array([beta_quantile(0.5, ai, bi) for ai, bi in zip(a, b)])
        np.testing.assert_allclose(lam, (1 - mu) / mu * z / (1 - z), rtol=1e-12)
        assert lam[0] == pytest.approx(4.0, rel=1e-12)


class TestDerivatives:
    def test_score_matches_richardson(self):
        spec, data, vec = random_model(np.random.default_rng(5))
        ref = richardson_gradient(lambda v: log_likelihood(spec, data, v), vec)
        got = score(spec, data, vec)
        assert np.max(np.abs(got - ref)) <= 1e-5 * np.max(np.abs(ref))

    def test_information_matches_richardson(self):
        spec, data, vec = random_model(np.random.default_rng(6))
        ref = -richardson_hessian(lambda v: log_likelihood(spec, data, v), vec)
        got = observed_information(spec, data, vec)
        assert np.allclose(got, got.T)
        assert np.max(np.abs(got - ref)) <= 1e-4 * np.max(np.abs(ref))

    def test_symmetric_data_gives_zero_location_score(self):
        rng = np.random.default_rng(8)
        half = rng.uniform(0.05, 0.95, 30)
        d = Dataset.from_columns(np.concatenate([half, 1 - half]), {})
        g = score(ModelSpec(0.5), d, [0.0, 0.4, 0.4])
        assert abs(g[0]) <= 1e-6
        assert abs(g[1]) > 1e-3  # the shape components carry signal

    def test_covariance_from_information(self):
        info = np.array([[4.0, 1.0], [1.0, 3.0]])
        np.testing.assert_allclose(covariance_from_information(info), np.linalg.inv(info),
                                   rtol=1e-14)
        with pytest.raises(SingularInformationError):
            covariance_from_information(np.array([[1.0, 1.0], [1.0, 1.0]]))
        with pytest.raises(SingularInformationError):
            covariance_from_information(-np.eye(2))


class TestFit:
    def test_converges_and_reports(self, scenario_fit):
        spec, data, fr = scenario_fit
        assert fr.converged, fr.message
        p = spec.n_params
        assert fr.aic == pytest.approx(-2 * fr.loglik + 2 * p, abs=1e-9)
        assert fr.bic == pytest.approx(-2 * fr.loglik + p * math.log(data.n), abs=1e-9)
        cov = fr.covariance
        assert np.array_equal(cov, cov.T)
        assert np.all(np.linalg.eigvalsh(cov) > 0)
        np.testing.assert_allclose(fr.std_errors.vector(), np.sqrt(np.diag(cov)))
        assert fr.loglik == pytest.approx(log_likelihood(spec, data, fr.coefficients), abs=1e-9)

    def test_estimates_near_truth(self, scenario_fit):
        _, _, fr = scenario_fit
        truth = true_coefficients(ScenarioConfig()).vector()
        z = (fr.estimates() - truth) / fr.std_errors.vector()
        assert np.all(np.abs(z) < 4)

    def test_first_order_condition(self, scenario_fit):
        spec, data, fr = scenario_fit
        assert np.max(np.abs(score(spec, data, fr.coefficients))) < 1e-4

    def test_loglik_not_below_start_and_monotone(self, scenario_fit):
        spec, data, fr = scenario_fit
        start = log_likelihood(spec, data, initial_coefficients(spec, data))
        assert fr.loglik >= start
        assert all(b >= a for a, b in zip(fr.history, fr.history[1:]))
        assert fr.history[0] == pytest.approx(start, abs=1e-9)

    def test_refit_is_fixed_point(self, scenario_fit):
        spec, data, fr = scenario_fit
        again = fit(spec, data, init=fr.coefficients)
        assert again.converged
        assert abs(again.loglik - fr.loglik) <= FIT_TOL.rel_tol * abs(fr.loglik)

    def test_deterministic(self, scenario_fit):
        spec, data, fr = scenario_fit
        again = fit(spec, data)
        assert np.array_equal(again.estimates(), fr.estimates())
        assert np.array_equal(again.covariance, fr.covariance)
        assert again.loglik == fr.loglik and again.n_iter == fr.n_iter

    def test_invariant_to_covariate_affine_maps(self, scenario_fit):
        spec, data, fr = scenario_fit
        shifted = Dataset(data.y, data.covariates * np.array([10.0, 1.0, 1.0]) + 50.0, data.names)
        fr2 = fit(spec, shifted)
        assert fr2.converged
        assert fr2.loglik == pytest.approx(fr.loglik, abs=1e-6)
        # slope on t1 rescales by 1/10 in the quantile predictor
        assert fr2.coefficients.theta[1] == pytest.approx(fr.coefficients.theta[1] / 10, rel=1e-4)
        assert fr2.std_errors.theta[1] == pytest.approx(fr.std_errors.theta[1] / 10, rel=1e-3)

    def test_iteration_budget(self, scenario_fit):
        spec, data, _ = scenario_fit
        fr = fit(spec, data, tol=Tolerance(1e-5, 1e-8, 2))
        assert not fr.converged and fr.n_iter <= 2

    def test_fitted_parameters(self, scenario_fit):
        spec, data, fr = scenario_fit
        mu, a, b, lam = fitted_parameters(fr, data)
        assert mu.shape == a.shape == b.shape == lam.shape == (data.n,)
        assert np.all(lam > 0)

    def test_tau_reparameterization_invariance(self):
        rng = np.random.default_rng(10)
        data = random_dataset(rng, n=200)
        lls = [fit(ModelSpec(t), data).loglik for t in (0.2, 0.5, 0.85)]
        assert max(lls) - min(lls) <= 1e-6

    def test_shape_covariates_break_tau_invariance(self):
        # lam_i = c * zeta_i(tau) and zeta_i(tau) / zeta_i(tau') varies by row,
        # so the model families differ once alpha or beta carry covariates
        rng = np.random.default_rng(10)
        data = random_dataset(rng, n=200)
        base = dict(alpha_terms=("x1",), beta_terms=("x2",))
        lls = [fit(ModelSpec(t, **base), data).loglik for t in (0.2, 0.85)]
        assert abs(lls[0] - lls[1]) > 1e-3

    def test_beta_data_recovers_beta_quantile(self):
        rng = np.random.default_rng(11)
        y = rng.beta(2.0, 5.0, 4000)
        fr = fit(ModelSpec(0.3), Dataset.from_columns(y, {}))
        mu_hat = 1 / (1 + math.exp(-fr.coefficients.theta[0]))
        se_mu = mu_hat * (1 - mu_hat) * fr.std_errors.theta[0]
        assert abs(mu_hat - beta_quantile(0.3, 2.0, 5.0)) < 4 * se_mu
        # shapes near the beta truth because lam is free but identified at 1
        assert math.exp(fr.coefficients.nu[0]) == pytest.approx(2.0, rel=0.25)

    def test_bad_start(self):
        spec, data, vec = random_model(np.random.default_rng(12))
        vec[3] = 60.0
        with pytest.raises(EvaluationError):
            fit(spec, data, init=Coefficients.from_vector(spec, vec))


def _stub_fit(est, se):
    spec = ModelSpec(0.5)
    return FitResult(Coefficients(np.array([est]), np.zeros(1), np.zeros(1)),
                     Coefficients(np.array([se]), np.array([1.0]), np.array([1.0])),
                     np.diag([se * se, 1.0, 1.0]), 0.0, 0.0, 0.0, True, 1, 0.0, 0.5, spec, 10)


class TestWald:
    def test_zero_estimate(self):
        row = wald_inference(_stub_fit(0.0, 1.0))[0]
        assert row.z == 0.0 and row.p_value == 1.0

    def test_interval_example(self):
        row = wald_inference(_stub_fit(0.3302, 0.0688), 0.95)[0]
        assert row.ci_low == pytest.approx(0.1953, abs=1e-4)
        assert row.ci_high == pytest.approx(0.4651, abs=1e-4)

    def test_p_value_at_critical_point(self):
        row = wald_inference(_stub_fit(1.959964, 1.0))[0]
        assert row.p_value == pytest.approx(0.05, abs=1e-6)

    def test_missing_se(self):
        row = wald_inference(_stub_fit(0.5, math.nan))[0]
        assert math.isnan(row.p_value)

    def test_level_domain(self):
        with pytest.raises(DomainError):
            wald_inference(_stub_fit(0.0, 1.0), 1.0)
