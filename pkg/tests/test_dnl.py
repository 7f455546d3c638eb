import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from plbarriers import dnl
from plbarriers import operators as ops
from plbarriers.params import ProblemParams

FAMILIES = [(0.5, 0.0, 3.0), (1.0, 1.0, 3.0), (2.0, 1.0, 3.0), (1.0, 0.5, 2.0), (0.7, 0.0, 4.0)]


def ones(s):
    return np.ones_like(np.asarray(s, dtype=float))


@pytest.mark.parametrize("alpha,a,k", FAMILIES)
def test_quadrature_transform_matches_closed_form(alpha, a, k):
    """[PAPER] phi from quadrature and root finding against the closed forms."""
    fam = dnl.PowerFamily(alpha, a, k)
    spec = dnl.build_phi(fam, k, classification=dnl.CONVERGENT)
    for v in np.linspace(0, 10, 21):
        exact = float(fam.phi_closed(v))
        assert spec.phi(v) == pytest.approx(exact, rel=1e-8, abs=1e-10)


def test_exponential_branch():
    """[PAPER] f = s^(k-1) is anchored at 1 and gives u = e^v."""
    fam = dnl.PowerFamily(2.0, 0.0, 3.0)
    spec = dnl.build_phi(fam, 3.0, classification=dnl.DIVERGENT)
    assert spec.anchor == 1.0
    for v in (-5.0, -1.0, 0.0, 2.0, 10.0):
        assert spec.phi(v) == pytest.approx(math.exp(v), rel=1e-9)


@pytest.mark.parametrize("alpha,a,k", FAMILIES)
def test_phi_ode(alpha, a, k):
    """[DERIVED] phi'(v) = f(phi(v))^(1/(k-1)) by centred differences."""
    fam = dnl.PowerFamily(alpha, a, k)
    spec = dnl.power_transform(fam)
    for v in (0.5, 2.0, 7.0):
        d = 1e-5 * (1 + v)
        fd = (spec.phi(v + d) - spec.phi(v - d)) / (2 * d)
        assert fd == pytest.approx(float(fam(spec.phi(v))) ** (1 / (k - 1)), rel=1e-7)


@pytest.mark.parametrize("alpha,a,k", FAMILIES + [(2.0, 0.0, 3.0)])
def test_z_is_log_derivative_of_phi_prime(alpha, a, k):
    """[DERIVED] Z = phi''/phi' (differences of phi) and Z is nonincreasing."""
    fam = dnl.PowerFamily(alpha, a, k)
    spec = dnl.power_transform(fam)
    vs = np.linspace(0.5, 8.0, 12)
    z = np.array([spec.Z(v) for v in vs])
    assert np.all(np.diff(z) <= 1e-10)
    for v, zv in zip(vs[::4], z[::4]):
        d = 1e-4
        p0, pp, pm = spec.phi(v), spec.phi(v + d), spec.phi(v - d)
        ratio = ((pp - 2 * p0 + pm) / d**2) / ((pp - pm) / (2 * d))
        assert ratio == pytest.approx(zv, rel=1e-5, abs=1e-8)


def test_finite_difference_derivative_fallback():
    """[DERIVED] without a callback Z uses central differences of f^(1/(k-1))."""
    fam = dnl.PowerFamily(1.0, 1.0, 3.0)
    plain = dnl.build_phi(lambda s: (np.asarray(s, float) + 1.0), 3.0, classification=dnl.CONVERGENT)
    for v in (0.2, 1.0, 5.0):
        assert plain.Z(v) == pytest.approx(float(fam.root_derivative(fam.phi_closed(v))), rel=1e-7)


@settings(max_examples=30, deadline=None)
@given(st.floats(-6.0, 6.0))
def test_round_trip(log_u):
    """[DERIVED] phi(phi^{-1}(u)) = u across twelve decades."""
    u = 10.0**log_u
    for spec in (dnl.power_transform(dnl.PowerFamily(0.5, 0.0, 3.0)), dnl.power_transform(dnl.PowerFamily(2.0, 0.0, 3.0))):
        assert abs(spec.phi(spec.phi_inv(u)) - u) <= 1e-9 * (1 + u)


def test_phi_convex_increasing_and_unbounded():
    """[PAPER] phi increasing and convex; phi^{-1} concave; phi(v) grows without bound."""
    spec = dnl.power_transform(dnl.PowerFamily(1.0, 1.0, 3.0))
    v = np.linspace(0, 10, 41)
    u = np.array([spec.phi(x) for x in v])
    assert np.all(np.diff(u) > 0) and np.all(np.diff(u, 2) >= -1e-9)
    w = np.linspace(0.1, 50, 41)
    inv = np.array([spec.phi_inv(x) for x in w])
    assert np.all(np.diff(inv, 2) <= 1e-9)
    big = [spec.phi(10.0**j) for j in range(0, 7)]
    assert all(b2 > b1 for b1, b2 in zip(big, big[1:])) and big[-1] > 1e10


def test_concavity_of_root_for_family():
    """[DERIVED] secant test: f^(1/(k-1)) concave when alpha <= k - 1."""
    for alpha in (0.5, 1.0, 2.0):
        fam = dnl.PowerFamily(alpha, 0.5, 3.0)
        s = np.linspace(0, 20, 101)
        g = fam(s) ** 0.5
        assert np.all(np.diff(g, 2) <= 1e-12)


@pytest.mark.parametrize("alpha,expected", [(0.5, dnl.CONVERGENT), (1.0, dnl.CONVERGENT), (1.5, dnl.CONVERGENT), (2.0, dnl.DIVERGENT)])
def test_classification_of_powers(alpha, expected):
    """[PAPER] s^alpha is convergent below k - 1 and divergent at k - 1."""
    assert dnl.classify_F(dnl.PowerFamily(alpha, 0.0, 3.0), 3.0).label == expected


def test_classification_of_constant():
    """[TRIVIAL] f = 1 gives F(u) = u."""
    cls = dnl.classify_F(ones, 3.0)
    assert cls.label == dnl.CONVERGENT
    assert cls.partial_sums[-1] == pytest.approx(1 - 1e-12)


def test_classification_inconclusive_for_slow_tail():
    """[TRIVIAL] an integrand barely integrable at 0 is not decided within twelve decades."""
    f = lambda s: np.asarray(s, float) ** 1.98
    assert dnl.classify_F(f, 3.0).label == dnl.INCONCLUSIVE
    with pytest.raises(dnl.TransformError, match="inconclusive"):
        dnl.build_phi(f, 3.0)


def test_nonpositive_f_rejected():
    """[TRIVIAL]"""
    with pytest.raises(dnl.TransformError, match="positive"):
        dnl.classify_F(lambda s: np.asarray(s, float) - 0.5, 3.0)


def test_sandwich_tight_for_shifted_power():
    """[DERIVED] f = (s+1)^(k-1): omega = 1 and both bounds are equalities."""
    rep = dnl.sandwich_check(dnl.PowerFamily(2.0, 1.0, 3.0), 3.0, 1.0, 1.0)
    assert rep.omega == 1.0 and rep.violations == 0 and rep.z_within


def test_sandwich_zero_omega_branch():
    """[PAPER] f = s^(k-1): omega = 0 and the note points to the anchor at 1."""
    rep = dnl.sandwich_check(dnl.PowerFamily(2.0, 0.0, 3.0), 3.0, 1.0, 1.0)
    assert rep.omega == 0.0 and rep.violations == 0 and "anchor u0 = 1" in rep.note


def test_sandwich_degenerate_constant():
    """[TRIVIAL] f = 1 is not increasing; the report says so."""
    rep = dnl.sandwich_check(ones, 3.0, 1.0, 1.0)
    assert "degenerate" in rep.note and rep.violations > 0


def test_sandwich_detects_violation():
    """[DERIVED] f = (s+1)^2 is not below (s/2 + 1)^2."""
    rep = dnl.sandwich_check(dnl.PowerFamily(2.0, 1.0, 3.0), 3.0, 0.25, 0.5)
    assert rep.violations > 0 and not rep.z_within


def test_transformed_problem_maps_data_and_route():
    """[PAPER] bounded positive data stay bounded; the classification picks the barrier route."""
    P = ProblemParams(ops.grad_trace(2))
    spec = dnl.power_transform(dnl.PowerFamily(1.0, 1.0, 3.0))
    out = dnl.transformed_problem(P, spec, initial=lambda r: 1.0 + 0.5 * np.cos(r))
    v = out.initial(np.linspace(0, 10, 11))
    assert np.all(np.isfinite(v)) and v.max() <= spec.phi_inv(1.5) + 1e-12 and v.min() >= spec.phi_inv(0.5) - 1e-12
    assert out.route == "VI.i-1"
    assert float(out.params.Z(np.array(1.0))) == pytest.approx(spec.Z(1.0))
    div = dnl.power_transform(dnl.PowerFamily(2.0, 0.0, 3.0))
    assert dnl.transformed_problem(P, div).route == "V.I"


def test_transformed_problem_errors():
    """[TRIVIAL] drift terms and data outside the range of phi are rejected."""
    spec = dnl.power_transform(dnl.PowerFamily(2.0, 0.0, 3.0))
    with pytest.raises(dnl.TransformError):
        dnl.transformed_problem(ProblemParams(ops.grad_trace(2), alpha=0.5), spec)
    with pytest.raises(dnl.TransformError, match="outside"):
        dnl.transformed_problem(ProblemParams(ops.grad_trace(2)), spec, initial=lambda r: np.cos(r))


def test_identity_for_linear_time_derivative():
    """[TRIVIAL] k = 1, f = 1: identity map and Z = 0."""
    spec = dnl.build_phi(ones, 1.0)
    assert spec.phi(2.5) == 2.5 and spec.phi_inv(-1.0) == -1.0 and spec.Z(3.0) == 0.0
    assert spec.z_function().identically_zero
    with pytest.raises(dnl.TransformError):
        dnl.build_phi(lambda s: 1.0 + np.asarray(s, float), 1.0)


@pytest.mark.parametrize("alpha,a,k", [(3.0, 0.0, 3.0), (-1.0, 0.0, 3.0), (0.5, 0.0, 1.0)])
def test_family_validation(alpha, a, k):
    """[TRIVIAL] alpha above k - 1 breaks concavity."""
    with pytest.raises(dnl.TransformError):
        dnl.PowerFamily(alpha, a, k)


def test_phi_outside_range():
    """[TRIVIAL]"""
    spec = dnl.power_transform(dnl.PowerFamily(0.5, 0.0, 3.0))
    with pytest.raises(dnl.TransformError):
        spec.phi(-1.0)
    with pytest.raises(dnl.TransformError):
        spec.phi_inv(-1.0)


def test_nonpositive_f_above_one_rejected_lazily():
    """[TRIVIAL] f positive on (0, 1] but negative beyond 4: an error only when the range is reached."""
    spec = dnl.build_phi(lambda s: 1 - np.asarray(s, float) / 4, 3.0)
    assert math.isfinite(spec.phi_inv(3.9))
    with pytest.raises(dnl.TransformError, match="positive"):
        spec.phi_inv(5.0)
    with pytest.raises(dnl.TransformError, match="positive"):
        spec.phi(5.0)
