"""Explicit super- and sub-solution barriers with all constants resolved.

A barrier has the form

    w(r, t) = sign * (a t + kappa(t) v(r))

where ``v`` is a radial profile and ``kappa`` is either b(1+t), a power
decay A(1 + t/E)^(-1/(k-1)) or an exponential decay A exp(-rate t).

Case ids:

* ``I.i``-``I.iv``: super-solutions, k > 1, split by sigma against gamma/2
* ``II.a``, ``II.b``, ``II.iii``, ``II.iv``: super-solutions, k = 1
* ``V.I`` / ``V.II``: the mirrored sub-solutions (k > 1 / k = 1); the
  super-solution sub-case they mirror is kept in ``variant``
* ``VI.i-1``, ``VI.i-2``: positive decaying sub-solutions
* ``VI.ii-1``, ``VI.ii-2``: super-solutions on a ball for negative chi
* ``VI.iii``: sub-solutions on a ball for positive chi
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import profiles as prof
from ._roots import BracketError, bisect, increasing_root
from .operators import lambda_extremes
from .params import ProblemParams

SUPER = "super"
SUB = "sub"

CASE_IDS = (
    "I.i", "I.ii", "I.iii", "I.iv",
    "II.a", "II.b", "II.iii", "II.iv",
    "V.I", "V.II",
    "VI.i-1", "VI.i-2", "VI.ii-1", "VI.ii-2", "VI.iii",
)
SPECIAL_CASES = ("i1", "i2", "ii1", "ii2", "iii")
SPECIAL_IDS = {"i1": "VI.i-1", "i2": "VI.i-2", "ii1": "VI.ii-1", "ii2": "VI.ii-2", "iii": "VI.iii"}

# Fixed epsilon of the exponential-linear construction (k = 1, 0 < sigma <= 1).
EPS_LINEAR = 0.1
# Relative tolerance when deciding sigma == gamma/2 or sigma == 0.
_EDGE_TOL = 1e-12


class BarrierBuildError(ValueError):
    """Raised when a barrier cannot be built for the given parameters."""


@dataclass(frozen=True)
class TimeFactor:
    """kappa(t): ``linear`` b(1+t), ``power_decay`` A(1+t/E)^(-expo), ``exp_decay`` A exp(-rate t)."""

    kind: str
    b: float = 0.0
    A: float = 0.0
    E: float = 1.0
    expo: float = 1.0
    rate: float = 0.0

    def value(self, t):
        t = np.asarray(t, dtype=float)
        if self.kind == "linear":
            return self.b * (1.0 + t)
        if self.kind == "power_decay":
            return self.A * (1.0 + t / self.E) ** (-self.expo)
        return self.A * np.exp(-self.rate * t)

    def deriv(self, t):
        t = np.asarray(t, dtype=float)
        if self.kind == "linear":
            return np.full(t.shape, self.b)
        if self.kind == "power_decay":
            return -self.expo / self.E * self.A * (1.0 + t / self.E) ** (-self.expo - 1.0)
        return -self.rate * self.A * np.exp(-self.rate * t)


@dataclass(frozen=True)
class TailTerm:
    """coef * r^power * exp(rate * r^epow); the building block of large-r bounds."""

    coef: float
    power: float
    rate: float = 0.0
    epow: float = 1.0

    def phi(self, r: float) -> float:
        return r**self.power * math.exp(self.rate * r**self.epow) if self.rate else r**self.power

    def order(self):
        return (self.epow if self.rate > 0 else 0.0, self.rate, self.power)


@dataclass(frozen=True)
class BarrierSpec:
    case_id: str
    direction: str
    sign: float
    a: float
    b: float
    profile: prof.RadialProfile
    kappa: TimeFactor
    region_radius: float
    chi_bound: float
    a_limit: float
    T: float
    sigma: float
    variant: str = ""
    scale_radius: float = 1.0
    tail: tuple = ()
    constants: dict = field(default_factory=dict, compare=False)

    @property
    def region(self) -> str:
        return "all_space" if math.isinf(self.region_radius) else "ball"

    def value(self, r, t):
        return self.sign * (self.a * np.asarray(t, float) + self.kappa.value(t) * self.profile.value(r))

    def w_r(self, r, t):
        return self.sign * self.kappa.value(t) * self.profile.d1(r)

    def w_rr(self, r, t):
        return self.sign * self.kappa.value(t) * self.profile.d2(r)

    def w_t(self, r, t):
        return self.sign * (self.a + self.kappa.deriv(t) * self.profile.value(r))

    def csv_row(self) -> dict:
        c = self.constants
        return {
            "case_id": self.case_id,
            "a": self.a,
            "b": self.b,
            "c": c.get("c", ""),
            "p": getattr(self.profile, "p", ""),
            "R": c.get("R", self.region_radius if self.region == "ball" else ""),
            "r_star": c.get("r_star", ""),
            "a_limit": self.a_limit,
        }


# -- dispatch -----------------------------------------------------------------------


def classify(k: float, sigma: float) -> str:
    """Super-solution sub-case for (k, sigma)."""
    if k < 1:
        raise BarrierBuildError(f"k must be >= 1, got {k}")
    if sigma < 0:
        raise BarrierBuildError("sigma must be nonnegative")
    if k > 1:
        half = (k + 1.0) / 2.0
        if sigma == 0:
            return "I.i"
        if abs(sigma - half) <= _EDGE_TOL * half:
            return "I.iii"
        return "I.ii" if sigma < half else "I.iv"
    if sigma == 0:
        return "II.a"
    if sigma <= 1:
        return "II.b"
    if sigma <= 2:
        return "II.iii"
    return "II.iv"


def _profile_shape(case: str, k: float, sigma: float) -> prof.RadialProfile:
    """Profile of a case with placeholder scale constants (enough for its shape)."""
    if case.startswith("I.") and case != "I.iv":
        return prof.Power((k + 1.0) / (k - 1.0))
    if case == "I.iv":
        return prof.RegularizedPower((k + 1.0) / (k - 1.0), sigma / (sigma - 1.0))
    if case == "II.a":
        return prof.ExpSquare(1.0)
    if case == "II.b":
        return prof.ExpLinearReg(1.0)
    if case == "II.iii":
        return prof.Power(sigma / (sigma - 1.0))
    return prof.RegularizedPower(2.0, sigma / (sigma - 1.0))


def lower_bound_for(params: ProblemParams, lam_lo: float) -> float:
    """min over lambda >= lam_lo of Lambda_min(lambda); the global bound when lam_lo = -inf."""
    if math.isfinite(lam_lo):
        op = params.op
        if op.builtin:
            return float(op.rank_one(lam_lo, -1.0))
        return lambda_extremes(op, lam_lo)[0]
    return params.lambda_inf


def _lower_scale(params: ProblemParams, lam_lo: float) -> float:
    N = lower_bound_for(params, lam_lo)
    if not math.isfinite(N):
        raise BarrierBuildError("minimum principle requires finite lower spectral bound")
    if N > 0:
        raise BarrierBuildError(f"lower spectral bound {N!r} is positive")
    return max(abs(N), 1.0)


# -- closed-form constants ------------------------------------------------------------


@dataclass
class _Constants:
    a: float
    profile: prof.RadialProfile
    tail: list
    scale: float
    bound: float  # supremum of admissible b (inf when unrestricted)
    strict: bool
    a_limit: float
    extra: dict


def _increasing_solve(g, what: str) -> float:
    try:
        return increasing_root(g, start=1.0, tol=1e-12)
    except BracketError as exc:
        raise BarrierBuildError(f"{what}: {exc}") from exc


def _constants(case: str, k: float, sigma: float, T: float, alpha: float, S: float, b: float) -> _Constants:
    """All constants of a sub-case for a given b, with S the spectral scale (M or |N|)."""
    if case.startswith("I."):
        gamma = k + 1.0
        gs = gamma / (gamma - 2.0)
        E = S * (gs * (1.0 + T)) ** k
        F = (gs * (1.0 + T)) ** sigma
        if case == "I.i":
            bound = min(1.0, E ** (1.0 - k), E ** (-1.0 / (k - 1.0)))
            tail = [(b * (E * b ** (k - 1) - 1.0), gs), (0.0, 0.0)]
            return _Constants(alpha, prof.Power(gs), tail, 1.0, bound, True, alpha, {"E": E})
        if case == "I.ii":
            R = (4 * alpha * F * b ** (sigma - 1)) ** ((gamma - 2) / (gamma - 2 * sigma))
            a = E * b**k * R**gs + alpha * F * b**sigma * R ** (2 * sigma / (gamma - 2))
            bound = min(1.0, 1.0 / (4 * E)) ** (1.0 / (k - 1))
            tail = [(E * b**k - b, gs), (alpha * F * b**sigma, 2 * sigma / (gamma - 2)), (-a, 0.0)]
            return _Constants(a, prof.Power(gs), tail, max(R, 1.0), bound, True, 0.0, {"E": E, "F": F, "R": R})
        if case == "I.iii":
            g = lambda x: E * x ** (k - 1) + alpha * F * x ** ((gamma - 2) / 2) - 0.5
            b0 = min(1.0, 0.5 * _increasing_solve(g, "b0 equation"))
            tail = [(E * b**k + alpha * F * b**sigma - b, gs)]
            return _Constants(0.0, prof.Power(gs), tail, 1.0, b0, False, 0.0, {"E": E, "F": F, "b0": b0})
        ss = sigma / (sigma - 1.0)
        g = lambda x: E * x ** (k - 1) + alpha * F * x ** (sigma - 1) - gs / (2 * ss)
        b0 = min(1.0, 0.5 * _increasing_solve(g, "b0 equation"))
        a = E * b**k + alpha * F * b**sigma + b * gs / ss
        tail = [
            (E * b**k, (gamma - sigma) / (sigma - 1)),
            (alpha * F * b**sigma - b * gs / (2 * ss), ss),
            (b * gs / (2 * ss) - a, 0.0),
        ]
        return _Constants(a, prof.RegularizedPower(gs, ss), tail, 1.0, b0, False, 0.0, {"E": E, "F": F, "b0": b0})

    Ebar = (1.0 + T) * S
    Fbar = alpha * (1.0 + T) ** sigma
    if case == "II.a":
        Ebar = 2.0 * (1.0 + T) * S
        c = 1.0 / Ebar
        tail = [TailTerm(b * (2 * c * (1 + T) * S - 1.0), 0.0, c, 2.0), (0.0, 0.0)]
        return _Constants(alpha, prof.ExpSquare(c), tail, 1.0 / math.sqrt(c), math.inf, False, alpha, {"c": c, "E": Ebar})
    if case == "II.b":
        eps = EPS_LINEAR
        g = lambda x: x * x * Ebar + sigma * x**sigma * Fbar - (1.0 - eps)
        c = _increasing_solve(g, "c equation")
        a = b * math.log(1.0 / eps) + (1.0 - sigma) * c**sigma * Fbar
        lim = (1.0 - sigma) * c**sigma * Fbar
        tail = [
            TailTerm(b * (c * c * Ebar + sigma * c**sigma * Fbar - 1.0), 0.0, c, 1.0),
            (b * c, 1.0),
            (b + lim - a, 0.0),
        ]
        scale = 2.0 * (math.log(1.0 / eps) + 1.0) / c
        return _Constants(a, prof.ExpLinearReg(c), tail, scale, math.inf, False, lim, {"c": c, "eps": eps, "E": Ebar, "F": Fbar})
    ss = sigma / (sigma - 1.0)
    if case == "II.iii":
        R = math.sqrt(4 * ss * Ebar)
        a = ss * Ebar * b * R ** (ss - 2) + ss**sigma * Fbar * b**sigma * R**ss
        bound = (1.0 / (4 * ss**sigma * Fbar)) ** (1.0 / (sigma - 1)) if Fbar > 0 else math.inf
        tail = [(ss**sigma * Fbar * b**sigma - b, ss), (ss * Ebar * b, ss - 2.0), (-a, 0.0)]
        return _Constants(a, prof.Power(ss), tail, max(R, 1.0), bound, True, 0.0, {"R": R, "E": Ebar, "F": Fbar})
    a = 2 * b * Ebar + (2 * b) ** sigma * Fbar + b / ss
    bound = (1.0 / (2**sigma * ss * Fbar)) ** (1.0 / (sigma - 1)) if Fbar > 0 else math.inf
    tail = [((2 * b) ** sigma * Fbar - b / ss, ss), (2 * b * Ebar + b / ss - a, 0.0)]
    return _Constants(a, prof.RegularizedPower(2.0, ss), tail, 1.0, bound, True, 0.0, {"E": Ebar, "F": Fbar})


def _as_terms(tail) -> tuple:
    return tuple(t if isinstance(t, TailTerm) else TailTerm(float(t[0]), float(t[1])) for t in tail)


def _spectral_scale(params: ProblemParams, case: str, direction: str) -> float:
    if direction == SUPER:
        return params.M
    return _lower_scale(params, _profile_shape(case, params.k, params.sigma).lambda_lower())


def admissible_b_bound(params: ProblemParams, direction: str = SUPER) -> tuple:
    """(bound, strict) for b in the sub-case selected by params."""
    case = classify(params.k, params.sigma)
    S = _spectral_scale(params, case, direction)
    c = _constants(case, params.k, params.sigma, params.T, params.alpha, S, 1.0)
    return c.bound, c.strict


def default_b(params: ProblemParams, direction: str = SUPER) -> float:
    """Half the admissibility bound (1 when unrestricted)."""
    bound, _ = admissible_b_bound(params, direction)
    return 1.0 if math.isinf(bound) else 0.5 * min(bound, 2.0)


def a_of_b(params: ProblemParams, b: float, direction: str = SUPER) -> float:
    """Closed-form a for a given b (no admissibility check)."""
    case = classify(params.k, params.sigma)
    S = _spectral_scale(params, case, direction)
    return _constants(case, params.k, params.sigma, params.T, params.alpha, S, b).a


def a_limit_table(params: ProblemParams, direction: str = SUPER) -> float:
    """Closed-form limit of a as b -> 0."""
    case = classify(params.k, params.sigma)
    S = _spectral_scale(params, case, direction)
    return _constants(case, params.k, params.sigma, params.T, params.alpha, S, 1.0).a_limit


def _aitken(seq: np.ndarray) -> np.ndarray:
    x0, x1, x2 = seq[:-2], seq[1:-1], seq[2:]
    denom = x2 - 2 * x1 + x0
    with np.errstate(divide="ignore", invalid="ignore"):
        acc = x2 - (x2 - x1) ** 2 / denom
    return np.where(np.isfinite(acc) & (denom != 0), acc, x2)


def extrapolate_a_limit(params: ProblemParams, direction: str = SUPER, j_max: int = 20, levels: int = 3) -> float:
    """Limit of a(2^-j), j = 1..j_max, by iterated Aitken acceleration.

    a(b) is a finite sum of powers of b, i.e. of geometric sequences in j;
    each Aitken pass removes the slowest remaining one.
    """
    seq = np.array([a_of_b(params, 2.0**-j, direction) for j in range(1, j_max + 1)])
    for _ in range(levels):
        scale = max(1.0, abs(seq[-1]))
        if len(seq) < 3 or abs(seq[-1] - seq[-2]) <= 1e-14 * scale:
            break
        seq = _aitken(seq)
    return float(seq[-1])


def _check_z_range(params: ProblemParams, lo: float, case_id: str):
    if lo < params.Z.domain_min:
        raise BarrierBuildError(
            f"{case_id}: barrier range reaches {lo!r}, below the Z domain minimum {params.Z.domain_min!r}"
        )


def _build(params: ProblemParams, b: float, direction: str) -> BarrierSpec:
    if not b > 0:
        raise BarrierBuildError("b must be positive")
    case = classify(params.k, params.sigma)
    S = _spectral_scale(params, case, direction)
    c = _constants(case, params.k, params.sigma, params.T, params.alpha, S, b)
    if (c.strict and not b < c.bound) or (not c.strict and not b <= c.bound * (1 + 1e-12)):
        rel = "<" if c.strict else "<="
        raise BarrierBuildError(f"{case}: b = {b!r} violates admissibility b {rel} {c.bound!r}")
    sign = 1.0 if direction == SUPER else -1.0
    case_id = case
    if direction == SUB:
        case_id = "V.I" if params.k > 1 else "V.II"
    extra = dict(c.extra)
    extra["spectral_scale"] = S
    spec = BarrierSpec(
        case_id=case_id,
        direction=direction,
        sign=sign,
        a=c.a,
        b=b,
        profile=c.profile,
        kappa=TimeFactor("linear", b=b),
        region_radius=math.inf,
        chi_bound=sign * params.alpha,
        a_limit=c.a_limit,
        T=params.T,
        sigma=params.sigma,
        variant=case,
        scale_radius=c.scale,
        tail=_as_terms(c.tail),
        constants=extra,
    )
    if direction == SUPER:
        _check_z_range(params, float(spec.value(0.0, 0.0)), case_id)
    else:
        _check_z_range(params, -math.inf, case_id)
    return spec


def build_supersolution(params: ProblemParams, b: float) -> BarrierSpec:
    """w = a t + b(1+t) v(r) on all of space."""
    return _build(params, b, SUPER)


def build_subsolution(params: ProblemParams, b: float) -> BarrierSpec:
    """w = -(a t + b(1+t) v(r)) on all of space, with M replaced by the case lower bound."""
    return _build(params, b, SUB)


def _r_star(k: float, sigma: float, alpha_abs: float, S: float, R: float) -> float:
    if sigma == k:
        return S / alpha_abs
    g = lambda r: 2 ** (sigma - k) * alpha_abs * r ** (sigma - k + 1) * (R * R - r * r) ** (2 * (k - sigma)) - S
    hi = R * (1 - 1e-15)
    try:
        return bisect(g, 1e-300, hi, tol=1e-14)
    except BracketError as exc:
        raise BarrierBuildError(f"r* equation on (0, {R!r}): {exc}") from exc


def build_special(params: ProblemParams, case: str, R: float = math.inf, mu: float = 1.0, E: float = 0.1) -> BarrierSpec:
    """Special barriers: decaying positive sub-solutions and ball barriers for signed chi.

    ``case`` is one of ``i1``, ``i2``, ``ii1``, ``ii2``, ``iii``.
    """
    if case not in SPECIAL_CASES:
        raise BarrierBuildError(f"unknown special case {case!r}")
    k, sigma = params.k, params.sigma
    case_id = SPECIAL_IDS[case]
    if case in ("i1", "i2"):
        if params.alpha != 0:
            raise BarrierBuildError(f"{case_id}: requires chi identically zero (alpha = 0)")
        if not mu > 0:
            raise BarrierBuildError(f"{case_id}: mu must be positive")
    if case == "i1":
        if not k > 1:
            raise BarrierBuildError("VI.i-1: requires k > 1")
        if not (0 < R < math.inf):
            raise BarrierBuildError("VI.i-1: requires a finite radius R > 0")
        profile = prof.CaseIProfile(k, R)
        Nabs = _lower_scale(params, profile.lambda_lower())
        ck = ((k + 1) / (k - 1)) ** k
        Edec = R ** (k + 1) / (ck * mu ** (k - 1) * (k - 1) * Nabs)
        A = mu * R ** (-(k + 1) / (k - 1))
        kappa = TimeFactor("power_decay", A=A, E=Edec, expo=1.0 / (k - 1))
        spec = BarrierSpec(case_id, SUB, 1.0, 0.0, A, profile, kappa, R, -params.alpha, mu,
                           params.T, sigma, variant=case, scale_radius=R,
                           constants={"E": Edec, "R": R, "mu": mu, "spectral_scale": Nabs})
        _check_z_range(params, 0.0, case_id)
        return spec
    if case == "i2":
        if k != 1:
            raise BarrierBuildError("VI.i-2: requires k = 1")
        if not E > 0:
            raise BarrierBuildError("VI.i-2: E must be positive")
        profile = prof.Gaussian(E)
        Nabs = _lower_scale(params, profile.lambda_lower())
        kappa = TimeFactor("exp_decay", A=mu, rate=2 * Nabs * E)
        spec = BarrierSpec(case_id, SUB, 1.0, 0.0, mu, profile, kappa, math.inf, -params.alpha, mu,
                           params.T, sigma, variant=case, scale_radius=3.0 / math.sqrt(E),
                           tail=(TailTerm(0.0, 0.0, -E, 2.0),),
                           constants={"E": E, "mu": mu, "spectral_scale": Nabs})
        _check_z_range(params, 0.0, case_id)
        return spec

    if not sigma >= k:
        raise BarrierBuildError(f"{case_id}: requires sigma >= k")
    if not (0 < R < math.inf):
        raise BarrierBuildError(f"{case_id}: requires a finite radius R > 0")
    if case in ("ii1", "ii2"):
        if params.alpha_hat_neg is None:
            raise BarrierBuildError(f"{case_id}: requires alpha_hat_neg = sup chi < 0")
        if (case == "ii1") != (sigma == k):
            raise BarrierBuildError(f"{case_id}: ii1 needs sigma = k and ii2 needs sigma > k")
        ahat = params.alpha_hat_neg
        S = params.M
        direction, sign = SUPER, 1.0
    else:
        if params.alpha_hat_pos is None or not params.alpha_hat_pos > 0:
            raise BarrierBuildError("VI.iii: requires alpha_hat_pos = inf chi > 0")
        ahat = params.alpha_hat_pos
        S = _lower_scale(params, prof.InverseGap(R).lambda_lower())
        direction, sign = SUB, -1.0
    r_star = _r_star(k, sigma, abs(ahat), S, R)
    if not r_star < R:
        raise BarrierBuildError(f"{case_id}: R = {R!r} must exceed r* = {r_star!r}")
    a = S * (2 * (1 + params.T) / (R * R - r_star * r_star) ** 2) ** k * r_star ** (k - 1)
    profile = prof.InverseGap(R)
    spec = BarrierSpec(case_id, direction, sign, a, 1.0, profile, TimeFactor("linear", b=1.0), R, ahat,
                       0.0, params.T, sigma, variant=case, scale_radius=R,
                       constants={"R": R, "r_star": r_star, "spectral_scale": S})
    if direction == SUPER:
        _check_z_range(params, float(spec.value(0.0, 0.0)), case_id)
    else:
        _check_z_range(params, -math.inf, case_id)
    return spec


def with_b(barrier: BarrierSpec, params: ProblemParams, b: float) -> BarrierSpec:
    """Rebuild a linear-in-time barrier with a different b (admissibility enforced)."""
    if barrier.case_id.startswith("VI"):
        raise BarrierBuildError("special barriers have no free b")
    return _build(params, b, barrier.direction)


def inflate_b(barrier: BarrierSpec, factor: float) -> BarrierSpec:
    """Copy with b scaled and every other constant kept: a deliberate negative control."""
    b = barrier.b * factor
    return replace(barrier, b=b, kappa=replace(barrier.kappa, b=b))
