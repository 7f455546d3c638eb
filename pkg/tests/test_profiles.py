import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import hyp2f1

from plbarriers import profiles as prof

PROFILES = [
    prof.Power(2.0),
    prof.Power(1.5),
    prof.RegularizedPower(2.0, 1.5),
    prof.RegularizedPower(3.0, 1.2),
    prof.ExpSquare(0.3),
    prof.ExpLinearReg(0.7),
    prof.InverseGap(3.0),
    prof.CaseIProfile(3.0, 2.0),
    prof.Gaussian(0.4),
]


def interior_radii(p, count=25):
    top = min(p.domain_max, 6.0)
    return np.linspace(0.05, 0.9 * top, count)


@pytest.mark.parametrize("p", PROFILES, ids=lambda p: p.describe())
def test_first_derivative_matches_finite_difference(p):
    """[DERIVED] centred differences of the value."""
    for r in interior_radii(p):
        h = 1e-5 * max(1.0, r)
        fd = (float(p.value(r + h)) - float(p.value(r - h))) / (2 * h)
        assert float(p.d1(r)) == pytest.approx(fd, rel=1e-6, abs=1e-8)


@pytest.mark.parametrize("p", PROFILES, ids=lambda p: p.describe())
def test_second_derivative_matches_finite_difference(p):
    """[DERIVED] centred differences of the first derivative."""
    for r in interior_radii(p):
        h = 1e-5 * max(1.0, r)
        fd = (float(p.d1(r + h)) - float(p.d1(r - h))) / (2 * h)
        assert float(p.d2(r)) == pytest.approx(fd, rel=1e-6, abs=1e-8)


@pytest.mark.parametrize("p", PROFILES, ids=lambda p: p.describe())
def test_ratio_is_consistent(p):
    """[TRIVIAL] ratio = r v''/v' and its infimum is the declared lower value."""
    r = interior_radii(p, 40)
    np.testing.assert_allclose(p.ratio(r), r * p.d2(r) / p.d1(r), rtol=1e-10)
    lam_lo = p.lambda_lower()
    if math.isfinite(lam_lo):
        assert np.all(1 - p.ratio(r) >= lam_lo - 1e-12)


@pytest.mark.parametrize("beta,beta_bar", [(2.0, 1.0), (2.0, 1.5), (3.0, 1.2), (4.0, 3.5)])
def test_regularized_power_matches_hypergeometric(beta, beta_bar):
    """[DERIVED] integral of (1+tau^p)^-1 over [0, X] = X 2F1(1, 1/p; 1+1/p; -X^p)."""
    p = prof.RegularizedPower(beta, beta_bar)
    for r in (0.1, 0.7, 1.0, 1.9, 4.0):
        X = r**beta
        q = p.p
        oracle = X * hyp2f1(1.0, 1.0 / q, 1.0 + 1.0 / q, -(X**q))
        assert float(p.value(r)) == pytest.approx(oracle, rel=1e-10)


def test_regularized_power_closed_value():
    """[DERIVED] beta = 2, beta_bar = 1 gives p = 1/2 and v(1) = 2 - 2 ln 2."""
    p = prof.RegularizedPower(2.0, 1.0)
    assert float(p.value(1.0)) == pytest.approx(2 - 2 * math.log(2), rel=1e-13)


def test_bulk_matches_scalar_path():
    """[DERIVED] vectorized cumulative quadrature against per-point adaptive quadrature."""
    p = prof.RegularizedPower(2.5, 1.3)
    r = np.logspace(-3, 3, 60)
    bulk = p.value(r)
    fresh = prof.RegularizedPower(2.5, 1.3)
    scalar = np.array([float(fresh.value(x)) for x in r])
    np.testing.assert_allclose(bulk, scalar, rtol=1e-11)


def test_increment_avoids_cancellation():
    """[DERIVED] increment equals the difference of values at moderate radii."""
    p = prof.RegularizedPower(2.0, 1.5)
    assert p.increment(2.0, 3.0) == pytest.approx(float(p.value(3.0)) - float(p.value(2.0)), rel=1e-11)


@settings(max_examples=40, deadline=None)
@given(st.floats(1.05, 4.0), st.floats(0.0, 0.95), st.floats(1e-3, 50.0), st.floats(1.01, 20.0))
def test_bounds_suite_random_configurations(beta, frac, r, R):
    """[PAPER] growth bounds, far-field sandwich and derivative bounds hold."""
    beta_bar = 1.0 + frac * (beta - 1.0)
    p = prof.RegularizedPower(beta, beta_bar)
    rep = prof.bounds_suite(p, [r, R, R * 1.5], R_anchor=R, k=3.0)
    assert rep.passed, [row for row in rep.rows if row.slack < 0]


def test_bounds_rows_cover_every_quantity():
    """[TRIVIAL]"""
    rows = prof.bounds_rows(prof.RegularizedPower(2.0, 1.5), 3.0, 2.0, 3.0)
    assert {name for name, *_ in rows} == {"iii_lower", "iii_upper", "v_slope", "vi_power", "iv_lower", "iv_upper"}


def test_case_one_profile_vanishes_at_edge():
    """[TRIVIAL] v(R) = 0 and v is nonincreasing."""
    p = prof.CaseIProfile(3.0, 2.0)
    assert float(p.value(2.0)) == 0.0
    assert np.all(np.diff(p.value(np.linspace(0, 2, 50))) <= 0)


@pytest.mark.parametrize("p,r", [(prof.Power(2.0), -1.0), (prof.InverseGap(2.0), 2.0), (prof.CaseIProfile(3.0, 1.0), 1.5)])
def test_domain_errors(p, r):
    """[TRIVIAL]"""
    with pytest.raises(prof.ProfileDomainError):
        p.value(r)


@pytest.mark.parametrize("factory", [lambda: prof.Power(1.0), lambda: prof.RegularizedPower(2.0, 2.0),
                                     lambda: prof.RegularizedPower(2.0, 0.5), lambda: prof.ExpSquare(0.0)])
def test_invalid_parameters(factory):
    """[TRIVIAL]"""
    with pytest.raises(ValueError):
        factory()


def test_bounds_anchor_must_exceed_one():
    """[TRIVIAL]"""
    with pytest.raises(ValueError):
        prof.bounds_rows(prof.RegularizedPower(2.0, 1.5), 1.0, 0.5, 3.0)
