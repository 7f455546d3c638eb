"""Parabolic residual of a barrier and sampled certification of its sign.

The residual is

    P = H(Dw, D^2w + Z(w) Dw⊗Dw) + chi |Dw|^sigma - w_t

with chi replaced by the barrier's adversarial bound, so a certified sign
holds for every admissible chi. Two evaluation paths are provided: a
radial one using the rank-one factorization of the Hessian, and a full
n-dimensional assembly that calls ``eval_H`` on explicit matrices.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.stats import qmc

from .barriers import SUPER, BarrierSpec, TailTerm
from .operators import eval_H
from .params import ProblemParams

EPS = np.finfo(float).eps
# Rounding allowance per sample, in units of eps times the term magnitudes.
ROUNDING_ULPS = 64.0
# Fraction of a ball radius that sampling stays inside.
BALL_INSET = 1e-3


class CertifyError(ValueError):
    """Raised for evaluation outside the barrier's domain."""


@dataclass(frozen=True)
class ResidualSample:
    r: float
    t: float
    residual: float
    path: str
    x: Optional[tuple] = None


def _chi_term(barrier: BarrierSpec, wr_abs, sigma: float):
    if sigma == 0:
        return np.full(np.shape(wr_abs), float(barrier.chi_bound))
    return barrier.chi_bound * wr_abs**sigma


def residual_parts(params: ProblemParams, barrier: BarrierSpec, r, t):
    """(residual, magnitude) via the radial factorization; vectorized over r, t."""
    r, t = np.broadcast_arrays(np.asarray(r, float), np.asarray(t, float))
    shape = r.shape
    r, t = r.ravel(), t.ravel()
    if np.any(r <= 0):
        raise CertifyError("radial residual needs r > 0 (the centre is a viscosity point)")
    op = params.op
    k = params.k
    w = barrier.value(r, t)
    Zw = np.broadcast_to(params.Z(w), r.shape)
    wr = np.broadcast_to(barrier.w_r(r, t), r.shape)
    wt = barrier.w_t(r, t)
    ratio = np.broadcast_to(barrier.profile.ratio(r), r.shape)
    term = np.zeros(r.shape)
    pos, neg, flat = wr > 0, wr < 0, wr == 0
    if pos.any():
        q = wr[pos]
        lam = ratio[pos] - 1.0 + r[pos] * q * Zw[pos]
        term[pos] = q**k / r[pos] * op.rank_one(lam, 1.0)
    if neg.any():
        q = -wr[neg]
        lam = r[neg] * q * Zw[neg] + 1.0 - ratio[neg]
        term[neg] = q**k / r[neg] * op.rank_one(lam, -1.0)
    if flat.any():
        term[flat] = op.radial_G(r[flat], 0.0, barrier.w_rr(r[flat], t[flat]))
    chi = _chi_term(barrier, np.abs(wr), params.sigma)
    res = term + chi - wt
    mag = np.abs(term) + np.abs(chi) + np.abs(wt)
    return res.reshape(shape), mag.reshape(shape)


def residual_radial(params: ProblemParams, barrier: BarrierSpec, r, t):
    res, _ = residual_parts(params, barrier, r, t)
    return float(res) if res.ndim == 0 else res


def _radial_derivs(barrier: BarrierSpec, r, t):
    return barrier.w_r(r, t), barrier.w_rr(r, t)


def residual_full(params: ProblemParams, barrier: BarrierSpec, x, t, fd_step: Optional[float] = None) -> float:
    """Residual at a point x by explicit assembly of Dw and D^2w.

    With ``fd_step`` the Hessian is built by central differences of the
    analytic gradient instead of the closed form.
    """
    x = np.asarray(x, dtype=float)
    z = np.asarray(params.z_center)
    n = params.n
    if x.shape != (n,):
        raise CertifyError(f"point has shape {x.shape}, expected ({n},)")
    d = x - z
    r = float(np.linalg.norm(d))
    if r == 0:
        raise CertifyError("residual_full needs x different from the centre")
    e = d / r
    w = float(barrier.value(r, t))
    wr, wrr = (float(v) for v in _radial_derivs(barrier, r, t))
    Dw = wr * e
    if fd_step is None:
        ee = np.outer(e, e)
        D2 = (wr / r) * (np.eye(n) - ee) + wrr * ee
    else:
        h = fd_step
        D2 = np.empty((n, n))
        for j in range(n):
            step = np.zeros(n)
            step[j] = h
            D2[:, j] = (_grad(barrier, d + step, t) - _grad(barrier, d - step, t)) / (2 * h)
        D2 = 0.5 * (D2 + D2.T)
    Zw = float(params.Z(w))
    X = D2 + Zw * np.outer(Dw, Dw)
    H = eval_H(params.op, Dw, X)
    chi = float(_chi_term(barrier, abs(wr), params.sigma))
    return H + chi - float(barrier.w_t(r, t))


def _grad(barrier: BarrierSpec, d: np.ndarray, t) -> np.ndarray:
    r = float(np.linalg.norm(d))
    return float(barrier.w_r(r, t)) * d / r


# -- large-r analytic check -------------------------------------------------------


def _log_phi(term: TailTerm, r: float) -> float:
    return term.power * math.log(r) + (term.rate * r**term.epow if term.rate else 0.0)


def _dominance_start(low: TailTerm, top: TailTerm) -> Optional[float]:
    """Smallest r from which low.phi/top.phi is nonincreasing (None if never)."""
    if low.rate == 0 and top.rate == 0:
        return 0.0 if low.power <= top.power else None
    q = top.epow if top.rate else low.epow
    if low.rate and top.rate and low.epow != top.epow:
        return None
    gap = top.rate - low.rate
    dp = low.power - top.power
    if gap < 0 or (gap == 0 and dp > 0):
        return None
    if dp <= 0:
        return 0.0
    return (dp / (q * gap)) ** (1.0 / q)


@dataclass
class TailReport:
    passed: bool
    bound: float
    R_start: float
    tol: float


def tail_check(terms, R0: float, rel_tol: float = 1e-12) -> TailReport:
    """Bound sup over r >= R0 of sum(coef * phi) by dominance of its leading term.

    The sum is divided by the fastest-growing phi; every lower-order term
    with positive coefficient is bounded by its ratio at R0 (valid because
    the ratio is nonincreasing from there on). Passing means the bound is
    nonpositive up to rounding.
    """
    terms = [t for t in terms if t.coef != 0.0]
    scale = sum(abs(t.coef) for t in terms) or 1.0
    tol = rel_tol * scale
    if not terms:
        return TailReport(True, 0.0, R0, tol)
    top_key = max(t.order() for t in terms)
    top = [t for t in terms if t.order() == top_key]
    rest = [t for t in terms if t.order() != top_key and t.coef > 0]
    bound = sum(t.coef for t in top)
    start = R0
    for low in rest:
        s = _dominance_start(low, top[0])
        if s is None:
            return TailReport(False, math.inf, R0, tol)
        start = max(start, s)
    for low in rest:
        bound += low.coef * math.exp(_log_phi(low, start) - _log_phi(top[0], start))
    return TailReport(bound <= tol, bound, start, tol)


# -- certification ------------------------------------------------------------


@dataclass
class CertificateReport:
    case_id: str
    variant: str
    direction: str
    n_samples: int
    worst_residual: float
    worst_point: tuple
    violations: int
    slack: float
    R_probe: float
    tail: Optional[TailReport]
    samples: dict = field(default_factory=dict, repr=False)

    @property
    def passed(self) -> bool:
        return self.violations == 0


def default_slack(barrier: BarrierSpec) -> float:
    return 1e-9 * (1.0 + abs(barrier.a) + barrier.b)


def sample_points(n_samples: int, r_max: float, T: float, sampler: str, seed: int):
    """(r, t) pairs in (0, r_max] x (0, T)."""
    if n_samples < 1:
        raise CertifyError("n_samples must be >= 1")
    if sampler == "grid":
        m = int(math.ceil(math.sqrt(n_samples)))
        u = (np.arange(m) + 0.5) / m
        U1, U2 = np.meshgrid(u, u, indexing="ij")
        u1, u2 = U1.ravel(), U2.ravel()
    elif sampler == "low_discrepancy":
        pts = qmc.Halton(d=2, scramble=True, seed=seed).random(n_samples)
        u1, u2 = pts[:, 0], pts[:, 1]
    else:
        raise CertifyError(f"unknown sampler {sampler!r}")
    r = r_max * np.clip(u1, 1e-9, 1.0)
    t = T * np.clip(u2, 1e-12, 1 - 1e-12)
    return r, t


def certify(
    params: ProblemParams,
    barrier: BarrierSpec,
    sampler: str = "low_discrepancy",
    n_samples: int = 100_000,
    slack: Optional[float] = None,
    R_probe: Optional[float] = None,
    seed: int = 0,
    keep_samples: bool = False,
) -> CertificateReport:
    """Check residual <= slack (super) or >= -slack (sub) at sampled (r, t)."""
    slack = default_slack(barrier) if slack is None else slack
    tail = None
    if barrier.region == "ball":
        r_max = barrier.region_radius * (1 - BALL_INSET)
    else:
        r_max = max(R_probe or 0.0, 2.0 * barrier.scale_radius)
        tail = tail_check(barrier.tail, r_max)
        r_max = max(r_max, tail.R_start)
    r, t = sample_points(n_samples, r_max, barrier.T, sampler, seed)
    res, mag = residual_parts(params, barrier, r, t)
    s = res if barrier.direction == SUPER else -res
    excess = s - (slack + ROUNDING_ULPS * EPS * mag)
    violations = int(np.count_nonzero(excess > 0))
    if tail is not None and not tail.passed:
        violations += 1
    i = int(np.argmax(s))
    samples = {"r": r, "t": t, "residual": res} if keep_samples else {}
    return CertificateReport(
        case_id=barrier.case_id,
        variant=barrier.variant,
        direction=barrier.direction,
        n_samples=len(r),
        worst_residual=float(res[i]),
        worst_point=(float(r[i]), float(t[i])),
        violations=violations,
        slack=slack,
        R_probe=r_max,
        tail=tail,
        samples=samples,
    )
