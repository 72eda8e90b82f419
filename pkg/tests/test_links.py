import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gb3reg.links import (
    CLAMP,
    LINK_NAMES,
    UNIT_LINKS,
    LinkFunction,
    get_link,
    link_apply,
    link_inv_derivative,
    link_inverse,
    taylor_intercept,
    taylor_slope,
)
from gb3reg.specfun import DomainError


def test_examples():
    assert link_inverse("logit", 0.0) == 0.5
    assert link_apply("cloglog", 1 - math.exp(-1)) == pytest.approx(0.0, abs=1e-15)
    assert link_inverse("probit", 1.959964) == pytest.approx(0.975, abs=1e-7)


def test_unknown_link():
    with pytest.raises(DomainError):
        LinkFunction("cauchit")


def test_get_link_accepts_names_and_instances():
    g = LinkFunction("probit")
    assert get_link(g) is g
    assert get_link("LOGIT") == LinkFunction("logit")


@pytest.mark.parametrize("kind", UNIT_LINKS)
@pytest.mark.parametrize("v", [0.0, 1.0, -0.5, math.nan])
def test_unit_domain(kind, v):
    with pytest.raises(DomainError):
        link_apply(kind, v)


@pytest.mark.parametrize("v", [0.0, -1.0, math.inf])
def test_log_domain(v):
    with pytest.raises(DomainError):
        link_apply("log", v)


@pytest.mark.parametrize("kind", UNIT_LINKS)
def test_round_trip_random_points(kind):
    rng = np.random.default_rng(LINK_NAMES.index(kind))
    v = rng.uniform(1e-6, 1 - 1e-6, 1000)
    assert np.max(np.abs(link_inverse(kind, link_apply(kind, v)) - v)) <= 1e-10


def test_log_round_trip():
    v = np.geomspace(1e-8, 1e8, 1000)
    np.testing.assert_allclose(link_inverse("log", link_apply("log", v)), v, rtol=1e-14)


@pytest.mark.parametrize("kind", LINK_NAMES)
def test_inverse_monotone(kind):
    eta = np.linspace(-10, 10, 2001)
    assert np.all(np.diff(link_inverse(kind, eta)) >= 0)
    inner = np.linspace(-3, 3, 601)
    assert np.all(np.diff(link_inverse(kind, inner)) > 0)


# inverses up to an additive constant, written as -(1 - mu) where mu is close
# to 1 so that the differenced values never cancel
MP_INVERSE = {
    "logit": lambda e: -1 / (1 + mp.exp(e)),
    "probit": lambda e: -mp.ncdf(-e),
    "loglog": lambda e: mp.exp(-mp.exp(-e)),
    "cloglog": lambda e: -mp.exp(-mp.exp(e)),
    "log": mp.exp,
}


@pytest.mark.parametrize("kind", LINK_NAMES)
@given(eta=st.floats(-2, 2))
def test_derivative_matches_central_difference(kind, eta):
    h = 1e-5
    fd = (link_inverse(kind, eta + h) - link_inverse(kind, eta - h)) / (2 * h)
    assert link_inv_derivative(kind, eta) == pytest.approx(fd, rel=1e-6, abs=1e-12)


@pytest.mark.parametrize("kind", LINK_NAMES)
@given(eta=st.floats(-8, 8))
def test_derivative_matches_high_precision(kind, eta):
    with mp.workdps(40):
        ref = float(mp.diff(MP_INVERSE[kind], eta))
    assert link_inv_derivative(kind, eta) == pytest.approx(ref, rel=1e-12, abs=1e-300)


@pytest.mark.parametrize("kind", UNIT_LINKS)
def test_clamped_inverse(kind):
    out = link_inverse(kind, np.array([-1e4, 1e4]))
    assert out[0] == CLAMP and out[1] == 1 - CLAMP


@pytest.mark.parametrize("kind", LINK_NAMES)
def test_derivative_finite_at_extremes(kind):
    d = link_inv_derivative(kind, np.array([-800.0, 800.0]))
    assert np.all(np.isfinite(d) | np.isinf(d)) and not np.any(np.isnan(d))


class TestTaylor:
    def test_documented_values(self):
        assert taylor_slope("logit") == pytest.approx(0.5, abs=1e-15)
        assert taylor_slope("probit") == pytest.approx(math.sqrt(2 / math.pi), abs=1e-14)
        assert taylor_slope("loglog") == pytest.approx(1.0, abs=1e-15)
        e1 = math.exp(-1)
        assert taylor_slope("cloglog") == pytest.approx(e1 / (1 - e1), abs=1e-15)

    def test_intercepts(self):
        assert taylor_intercept("logit") == pytest.approx(-math.log(2), abs=1e-15)
        assert taylor_intercept("loglog") == pytest.approx(-1.0, abs=1e-15)
        assert taylor_intercept("cloglog") == pytest.approx(math.log(1 - math.exp(-1)), abs=1e-15)

    @pytest.mark.parametrize("kind", UNIT_LINKS)
    def test_slope_matches_finite_difference(self, kind):
        h = 1e-4
        f = lambda e: math.log(link_inverse(kind, e))  # noqa: E731
        # fourth-order central difference keeps truncation error near 1e-14
        fd = (-f(2 * h) + 8 * f(h) - 8 * f(-h) + f(-2 * h)) / (12 * h)
        assert taylor_slope(kind) == pytest.approx(fd, abs=1e-8)

    def test_log_link_unsupported(self):
        with pytest.raises(DomainError):
            taylor_slope("log")
        with pytest.raises(DomainError):
            taylor_intercept("log")
