"""Acceptance suite: one test per criterion, each at its stated tolerance.

The conftest hook prints a PASS/FAIL line per criterion after the run.
"""
import math
import time

import numpy as np

from matrix import all_cases, linear_cases, negative_control
from plbarriers import barriers as bf
from plbarriers import dnl, lab
from plbarriers import operators as ops
from plbarriers import profiles as prof
from plbarriers.certify import certify, residual_full, residual_parts
from plbarriers.params import ProblemParams, ZFunction


def _lambdas(seed, count=200):
    rng = np.random.default_rng(seed)
    return np.concatenate([[-1e3, -1.0, 0.0, 1.0, 1e3], rng.uniform(-1e3, 1e3, count)])


def test_criterion_1_spectral_closed_forms(record_property):
    """[PAPER] rank-one extremes of the built-in operators match their closed forms."""
    start = time.perf_counter()
    lams = _lambdas(1)
    worst_gt = worst_tes = 0.0
    for n in range(2, 7):
        op = ops.grad_trace(n)
        for lam in lams:
            lo, hi = ops.lambda_extremes(op, lam, sphere_samples=16)
            worst_gt = max(worst_gt, abs(hi - (n - 1)), abs(lo + (n - 1)))
    for n in range(3, 7):
        for m in range(2, n):
            op = ops.truncated_eigen_sum(n, m)
            for lam in lams:
                lo, hi = ops.lambda_extremes(op, lam, sphere_samples=16)
                if lam >= 0:
                    worst_tes = max(worst_tes, abs(hi - (n + 1 - m)))
                if lam <= 0:
                    worst_tes = max(worst_tes, abs(lo - (lam - (n - m + 1))))
    elapsed = time.perf_counter() - start
    record_property("detail", f"grad_trace gap {worst_gt:.1e}, truncated sum gap {worst_tes:.1e}, {elapsed:.1f}s")
    assert worst_gt <= 1e-10 and worst_tes <= 1e-8 and elapsed < 60


BUILTINS = [ops.grad_trace(2), ops.grad_trace(4, 1.0), ops.truncated_eigen_sum(3, 2), ops.truncated_eigen_sum(5, 3, 2.0),
            ops.median_eigenvalue(3)]


def test_criterion_2_condition_suite(record_property):
    """[DERIVED] 10^4 randomized monotonicity and homogeneity trials per built-in operator."""
    start = time.perf_counter()
    failures = []
    for i, op in enumerate(BUILTINS):
        rep = ops.check_conditions(op, trials=10_000, seed=100 + i, tol=1e-9)
        if not rep.passed:
            failures.append((op.name, {k: v.violations for k, v in rep.results.items()}))
    elapsed = time.perf_counter() - start
    record_property("detail", f"{len(BUILTINS)} operators, {len(failures)} with violations, {elapsed:.1f}s")
    assert not failures and elapsed < 60, failures


def test_criterion_3_profile_inequalities(record_property):
    """[DERIVED] growth, sandwich and derivative bounds over 10^4 profile configurations; v'' against differences."""
    start = time.perf_counter()
    rng = np.random.default_rng(3)
    violations, worst_fd = 0, 0.0
    for i in range(10_000):
        beta = rng.uniform(1.05, 4.0)
        beta_bar = 1.0 + rng.uniform(0.0, 0.95) * (beta - 1.0)
        R = rng.uniform(1.01, 50.0)
        r = 10.0 ** rng.uniform(-3, 3)
        p = prof.RegularizedPower(beta, beta_bar)
        violations += prof.bounds_suite(p, [r, R * rng.uniform(1.0, 5.0)], R_anchor=R, k=3.0, tol=1e-10).violations
        if i % 10 == 0:
            x = 10.0 ** rng.uniform(-1, 1.5)
            h = 1e-5 * x
            fd = (float(p.d1(x + h)) - float(p.d1(x - h))) / (2 * h)
            exact = float(p.d2(x))
            worst_fd = max(worst_fd, abs(fd - exact) / max(abs(exact), 1e-300))
    elapsed = time.perf_counter() - start
    record_property("detail", f"{violations} violations, v'' relative gap {worst_fd:.1e}, {elapsed:.1f}s")
    assert violations == 0 and worst_fd <= 1e-6 and elapsed < 60


def test_criterion_4_certification_matrix(record_property):
    """[DERIVED] every case id certifies at 10^5 samples with the tail check; broken barriers fail."""
    start = time.perf_counter()
    cases = all_cases()
    ids = {c.barrier.case_id for c in cases}
    failed = [c.label for c in cases if not certify(c.params, c.barrier, n_samples=100_000, seed=7).passed]
    caught = [c.label for c in cases if not certify(c.params, negative_control(c), n_samples=100_000, seed=7).passed]
    elapsed = time.perf_counter() - start
    record_property("detail", f"{len(cases)} cases, {len(ids)} ids, {len(failed)} failed, "
                              f"{len(caught)}/{len(cases)} controls caught, {elapsed:.0f}s")
    expected = {"I.i", "I.ii", "I.iii", "I.iv", "II.a", "II.b", "II.iii", "II.iv", "V.I", "V.II",
                "VI.i-1", "VI.i-2", "VI.ii-1", "VI.ii-2", "VI.iii"}
    assert ids == expected
    assert not failed, failed
    assert len(caught) == len(cases)
    assert elapsed < 300


def test_criterion_5_radial_full_equivalence(record_property):
    """[DERIVED] explicit Hessian assembly against the radial residual at 10^3 points per case."""
    rng = np.random.default_rng(5)
    worst = 0.0
    cases = all_cases()
    for case in cases:
        n = case.params.n
        R = case.barrier.region_radius if case.barrier.region == "ball" else 5.0
        for _ in range(1000):
            x = rng.normal(size=n)
            x *= rng.uniform(0.02, 0.98) * R / np.linalg.norm(x)
            t = rng.uniform(0.0, case.params.T)
            rad, mag = residual_parts(case.params, case.barrier, np.linalg.norm(x), t)
            full = residual_full(case.params, case.barrier, x, t)
            worst = max(worst, abs(full - float(rad)) / (1.0 + float(mag)))
    record_property("detail", f"{len(cases)} cases, worst relative gap {worst:.1e}")
    assert worst <= 1e-8


def test_criterion_6_drift_limits(record_property):
    """[PAPER] extrapolated a(2^-j), j = 1..20, against the closed-form limits."""
    worst, checked = 0.0, set()
    special = {}
    for case in linear_cases():
        P, w = case.params, case.barrier
        key = (P.op.name, P.sigma, w.direction)
        if key in checked:
            continue
        checked.add(key)
        gap = abs(bf.extrapolate_a_limit(P, w.direction) - bf.a_limit_table(P, w.direction))
        worst = max(worst, gap)
        if P.k == 1 and w.direction == bf.SUPER and 0 < P.sigma <= 1:
            special[P.sigma] = bf.a_limit_table(P)
    # the sigma = 0 limit is alpha itself
    P0 = ProblemParams(ops.truncated_eigen_sum(3, 2), sigma=0.0, T=1.0, alpha=0.5)
    zero_gap = abs(bf.extrapolate_a_limit(P0) - 0.5)
    record_property("detail", f"{len(checked)} limits, worst gap {worst:.1e}, sigma=0 gap {zero_gap:.1e}")
    assert worst <= 1e-6 and zero_gap <= 1e-6
    assert set(special) == {0.5, 1.0}


def _pair(rng, R, h):
    r = h * np.arange(int(round(R / h)) + 1)
    u = sum(rng.normal(scale=0.4) * np.cos((j + 1) * r + rng.uniform(0, 6)) for j in range(3))
    bump = rng.uniform(0, 0.5) * np.exp(-((r - rng.uniform(0, R)) ** 2)) * (R - r) / R
    return u, u + bump


def test_criterion_7_discrete_comparison(record_property):
    """[DERIVED] ordered pairs stay ordered, data stay under the barrier, refinement order at least 0.8."""
    start = time.perf_counter()
    rng = np.random.default_rng(7)
    pair_params = [ProblemParams(ops.truncated_eigen_sum(3, 2), sigma=1.5, T=0.2, alpha=0.3, Z=ZFunction.zero_above(0.5, 0.4)),
                   ProblemParams(ops.grad_trace(2), sigma=2.0, T=0.05, alpha=0.3)]
    violations = 0
    for i in range(20):
        P = pair_params[i % 2]
        u0, v0 = _pair(rng, 2.0, 0.1)
        violations += lab.simulate_pair(P, u0, v0, 2.0, lab.SchemeConfig(0.1, P.T), None).violations

    P = ProblemParams(ops.grad_trace(2), T=0.25, alpha=0.5)
    h, R = 0.05, 3.0
    dom_ref = lab.refinement_study(P, lambda r: np.cos(r) ** 2, R, h, P.T)
    tol = dom_ref.C * h
    rows = lab.domination_sweep(P, lambda b: bf.build_supersolution(P, b), [1e-3, 1e-4], 2.0, R, h, tol=tol)
    dominated = all(row.check.passed and row.centre_excess <= tol for row in rows)

    edge = 0.5 * math.cos(R)
    ref = lab.refinement_study(P, lambda r: 0.5 * np.cos(r), R, h, P.T, boundary=lambda t: edge + P.alpha * t)
    elapsed = time.perf_counter() - start
    record_property("detail", f"{violations} ordering violations in 20 pairs, domination {dominated}, "
                              f"order {ref.order:.2f}, {elapsed:.0f}s")
    assert violations == 0 and dominated and ref.order >= 0.8 and elapsed < 300


def test_criterion_8_doubly_nonlinear_transform(record_property):
    """[PAPER] power-family closed forms, classification, round trip and concavity."""
    worst = 0.0
    for alpha, a, k in [(0.5, 0.0, 3.0), (1.0, 1.0, 3.0), (2.0, 1.0, 3.0), (2.0, 0.0, 3.0)]:
        fam = dnl.PowerFamily(alpha, a, k)
        spec = dnl.build_phi(fam, k)
        for v in np.linspace(0, 10, 41):
            exact = float(fam.phi_closed(v))
            worst = max(worst, abs(spec.phi(v) - exact) / max(1.0, abs(exact)))
    labels_ok = all(dnl.classify_F(dnl.PowerFamily(al, 0.0, 3.0), 3.0).label == dnl.CONVERGENT for al in (0.25, 0.5, 1.0, 1.5))
    labels_ok &= all(dnl.classify_F(lambda s, k=k: np.asarray(s, float) ** (k - 1), k).label == dnl.DIVERGENT
                     for k in (2.0, 3.0, 4.0))
    spec = dnl.power_transform(dnl.PowerFamily(0.5, 0.0, 3.0))
    us = np.logspace(-6, 6, 61)
    trip = max(abs(spec.phi(spec.phi_inv(u)) - u) / u for u in us)
    inv = np.array([spec.phi_inv(u) for u in np.linspace(0.1, 100, 61)])
    concave = bool(np.all(np.diff(inv, 2) <= 1e-9))
    record_property("detail", f"closed-form gap {worst:.1e}, round trip {trip:.1e}, labels {labels_ok}, concave {concave}")
    assert worst <= 1e-6 and labels_ok and trip <= 1e-9 and concave


def test_criterion_9_growth_trend(record_property):
    """[PAPER] sub-critical boundary growth: the centre margin falls across R in {5, 10, 20, 40}."""
    P = ProblemParams(ops.grad_trace(2), sigma=0.0, T=2.5)
    rep = lab.pl_experiment(P, P.gamma_star, [5.0, 10.0, 20.0, 40.0], h=0.25)
    margins = [row.margin for row in rep.rows]
    record_property("detail", "margins " + ", ".join(f"{m:.3g}" for m in margins))
    assert rep.margins_decreasing and margins[0] > margins[-1]
