import numpy as np
import pytest

from matrix import all_cases, negative_control
from plbarriers import barriers as bf
from plbarriers import operators as ops
from plbarriers.certify import (
    CertifyError,
    TailTerm,
    certify,
    residual_full,
    residual_parts,
    residual_radial,
    sample_points,
    tail_check,
)
from plbarriers.params import ProblemParams, ZFunction

CASES = all_cases()


@pytest.mark.parametrize("case", CASES, ids=lambda c: c.label)
def test_certificate_passes(case):
    """[DERIVED] sampled residual sign for every case in the matrix."""
    rep = certify(case.params, case.barrier, n_samples=20_000, seed=1)
    assert rep.passed, (rep.worst_residual, rep.worst_point, rep.tail)


@pytest.mark.parametrize("case", CASES, ids=lambda c: c.label)
def test_negative_control_fails(case):
    """[DERIVED] a broken barrier is caught by the same sampler."""
    assert not certify(case.params, negative_control(case), n_samples=20_000, seed=1).passed


def test_hand_computed_residual():
    """[DERIVED] n = 2, w = a t + b(1+t) r^2: residual = b r^2 (8 b^2 (1+t)^3 - 1) + alpha - a."""
    P = ProblemParams(ops.grad_trace(2), sigma=0.0, T=1.0, alpha=0.5)
    b = 1e-4
    w = bf.build_supersolution(P, b)
    r = np.array([0.5, 1.0, 3.0])
    t = np.array([0.1, 0.5, 0.9])
    oracle = b * r**2 * (8 * b**2 * (1 + t) ** 3 - 1) + P.alpha - w.a
    np.testing.assert_allclose(residual_radial(P, w, r, t), oracle, rtol=1e-12, atol=1e-15)


@pytest.mark.parametrize("case", [c for c in CASES if c.params.n == 3][::3], ids=lambda c: c.label)
def test_full_assembly_matches_radial(case):
    """[DERIVED] explicit Hessian assembly and eval_H against the rank-one path."""
    rng = np.random.default_rng(4)
    R = case.barrier.region_radius if case.barrier.region == "ball" else 5.0
    for _ in range(30):
        x = rng.normal(size=case.params.n)
        x *= rng.uniform(0.05, 0.95) * R / np.linalg.norm(x)
        t = rng.uniform(0, case.params.T)
        rad, mag = residual_parts(case.params, case.barrier, np.linalg.norm(x), t)
        full = residual_full(case.params, case.barrier, x, t)
        assert abs(full - float(rad)) <= 1e-8 * (1 + float(mag))


def test_finite_difference_hessian_agrees():
    """[DERIVED] Hessian from differences of the analytic gradient."""
    P = ProblemParams(ops.grad_trace(3), sigma=3.0, T=1.0, alpha=0.5)
    w = bf.build_supersolution(P, bf.default_b(P))
    x = np.array([0.4, -0.3, 0.8])
    exact = residual_full(P, w, x, 0.5)
    approx = residual_full(P, w, x, 0.5, fd_step=1e-5)
    assert approx == pytest.approx(exact, rel=1e-6, abs=1e-9)


def test_gradient_correction_enters_residual():
    """[DERIVED] a nonzero Z adds Z(w)|Dw|^2 along e: compare with explicit assembly."""
    P = ProblemParams(ops.truncated_eigen_sum(3, 2), sigma=1.5, T=1.0, alpha=0.2, Z=ZFunction.zero_above(0.5, 0.3))
    w = bf.build_supersolution(P, bf.default_b(P))
    x = np.array([0.3, 0.1, -0.2])
    rad = residual_radial(P, w, np.linalg.norm(x), 0.4)
    assert residual_full(P, w, x, 0.4) == pytest.approx(rad, rel=1e-10, abs=1e-13)


def test_tail_check_detects_positive_leading_term():
    """[TRIVIAL] sum of c_i r^p_i <= 0 for large r iff the top coefficient is negative."""
    good = [TailTerm(-1.0, 2.0), TailTerm(5.0, 1.0), TailTerm(3.0, 0.0)]
    assert tail_check(good, 1.0).passed is False  # 5/1 + 3/1 - 1 > 0 at R0 = 1
    assert tail_check(good, 100.0).passed
    assert not tail_check([TailTerm(1e-6, 2.0), TailTerm(-1.0, 1.0)], 1e6).passed


def test_tail_check_exponential_dominance():
    """[TRIVIAL] e^(c r^2) beats any power once past the dominance radius."""
    rep = tail_check([TailTerm(-1.0, 0.0, 1.0, 2.0), TailTerm(1.0, 4.0)], 10.0)
    assert rep.passed and rep.R_start >= 10.0


@pytest.mark.parametrize("sampler", ["grid", "low_discrepancy"])
def test_sample_points_inside_box(sampler):
    """[TRIVIAL]"""
    r, t = sample_points(1000, 3.0, 2.0, sampler, seed=0)
    assert len(r) >= 1000 and np.all((r > 0) & (r <= 3.0)) and np.all((t > 0) & (t < 2.0))


def test_sampler_deterministic_per_seed():
    """[TRIVIAL]"""
    a = sample_points(500, 1.0, 1.0, "low_discrepancy", seed=3)
    b = sample_points(500, 1.0, 1.0, "low_discrepancy", seed=3)
    np.testing.assert_array_equal(a[0], b[0])


def test_invalid_requests():
    """[TRIVIAL]"""
    P = ProblemParams(ops.grad_trace(2))
    w = bf.build_supersolution(P, 1e-4)
    with pytest.raises(CertifyError):
        sample_points(0, 1.0, 1.0, "grid", 0)
    with pytest.raises(CertifyError):
        sample_points(10, 1.0, 1.0, "sobol", 0)
    with pytest.raises(CertifyError):
        residual_radial(P, w, 0.0, 0.5)
    with pytest.raises(CertifyError):
        residual_full(P, w, np.zeros(2), 0.5)
