"""Change of variables u = phi(v) for H(Du, D^2u) = f(u) u_t.

phi solves phi'(v) = f(phi(v))^(1/(k-1)), so phi^{-1}(u) is the integral of
f^(-1/(k-1)) from an anchor u0 to u. In the new variable the equation
carries the gradient correction Z(v) Dv⊗Dv with

    Z(v) = phi''(v)/phi'(v) = (f^(1/(k-1)))'(phi(v)).

The anchor is 0 when the integral converges at 0 and 1 otherwise.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np
from scipy import integrate

from ._roots import BracketError, bisect
from .params import ProblemParams, ZFunction

CONVERGENT = "convergent"
DIVERGENT = "divergent"
INCONCLUSIVE = "inconclusive"


class TransformError(ValueError):
    """Raised for invalid nonlinearities or values outside the transform's range."""


# -- closed-form family ---------------------------------------------------------


@dataclass(frozen=True)
class PowerFamily:
    """f(s) = (s + a)^alpha with 0 <= alpha <= k - 1 (concavity of f^(1/(k-1)))."""

    alpha: float
    a: float
    k: float

    def __post_init__(self):
        if not self.k > 1:
            raise TransformError("PowerFamily needs k > 1")
        if self.alpha < 0 or self.a < 0:
            raise TransformError("PowerFamily needs alpha >= 0 and a >= 0")
        if self.alpha > self.k - 1 + 1e-15:
            raise TransformError("PowerFamily needs alpha <= k - 1")
        if self.exponential and self.a == 0:
            pass  # f = s^(k-1): divergent branch, phi = e^v

    @property
    def c_k(self) -> float:
        return (self.k - 1 - self.alpha) / (self.k - 1)

    @property
    def exponential(self) -> bool:
        return abs(self.alpha - (self.k - 1)) <= 1e-15

    def __call__(self, s):
        return (np.asarray(s, float) + self.a) ** self.alpha

    def root_derivative(self, s):
        """d/ds of f^(1/(k-1)) = (s + a)^(alpha/(k-1))."""
        q = self.alpha / (self.k - 1)
        s = np.asarray(s, float)
        if q == 0:
            return np.zeros_like(s)
        with np.errstate(divide="ignore"):
            return q * (s + self.a) ** (q - 1)

    def phi_closed(self, v):
        v = np.asarray(v, float)
        if self.exponential:
            return np.exp(v) if self.a == 0 else self.a * np.exp(v) - self.a
        c = self.c_k
        return (c * v + self.a**c) ** (1 / c) - self.a

    def phi_inv_closed(self, u):
        u = np.asarray(u, float)
        if self.exponential:
            return np.log(u) if self.a == 0 else np.log((u + self.a) / self.a)
        c = self.c_k
        return ((u + self.a) ** c - self.a**c) / c


# -- classification ---------------------------------------------------------------


@dataclass
class Classification:
    label: str
    partial_sums: list
    increments: list
    ratio: float
    tail_estimate: float

    def __eq__(self, other):
        if isinstance(other, str):
            return self.label == other
        return NotImplemented

    __hash__ = None


def _fval(f, s: float, allow_zero: bool = False) -> float:
    """f(s) as a float; negative (or zero) and nonfinite values are a TransformError."""
    val = float(f(s))
    if not ((val > 0 or (allow_zero and val == 0)) and math.isfinite(val)):
        raise TransformError(f"f must be positive; f({s!r}) = {val!r}")
    return val


def _check_positive(f, k):
    s = np.logspace(-12, 0, 241)
    vals = np.asarray(f(s), float) * np.ones_like(s)
    if np.any(~np.isfinite(vals)) or np.any(vals <= 0):
        bad = s[(vals <= 0) | ~np.isfinite(vals)][0]
        raise TransformError(f"f must be positive on (0, 1]; f({bad!r}) = {float(f(bad))!r}")


def classify_F(f: Callable, k: float, quad_tol: float = 1e-6, divergence_threshold: float = 10.0, j_max: int = 12) -> Classification:
    """Does the integral of f^(-1/(k-1)) over (eps, 1] stay bounded as eps -> 0?

    Uses decade increments over [10^-j, 10^-(j-1)]: a stable ratio well below
    one (or a negligible geometric tail) means convergent, a ratio near or
    above one with a large partial sum means divergent.
    """
    if not k > 1:
        raise TransformError("classification needs k > 1")
    _check_positive(f, k)
    g = lambda s: _fval(f, s) ** (-1.0 / (k - 1))
    inc = []
    for j in range(1, j_max + 1):
        val, _ = integrate.quad(g, 10.0**-j, 10.0 ** (1 - j), epsabs=0.0, epsrel=1e-12, limit=200)
        inc.append(val)
    sums = list(np.cumsum(inc))
    ratios = [inc[i + 1] / inc[i] for i in range(len(inc) - 4, len(inc) - 1) if inc[i] > 0]
    rho = float(np.mean(ratios)) if ratios else 0.0
    stable = bool(ratios) and max(abs(x - rho) for x in ratios) <= 0.05 * max(rho, 1e-300)
    tail = inc[-1] * rho / (1 - rho) if rho < 1 else math.inf
    if tail <= quad_tol * max(1.0, sums[-1]) or (stable and rho <= 0.95):
        label = CONVERGENT
    elif rho >= 0.999 and sums[-1] > divergence_threshold:
        label = DIVERGENT
    else:
        label = INCONCLUSIVE
    return Classification(label, sums, inc, rho, tail)


# -- the transform ------------------------------------------------------------------


@dataclass
class TransformSpec:
    f: Callable
    k: float
    classification: str
    anchor: float
    root_derivative: Optional[Callable] = None
    _decades: dict = field(default_factory=dict, repr=False)
    _phi_cache: dict = field(default_factory=dict, repr=False)

    @property
    def identity(self) -> bool:
        return self.k == 1

    def _g(self, s: float) -> float:
        return _fval(self.f, s) ** (-1.0 / (self.k - 1))

    def _quad(self, lo: float, hi: float) -> float:
        pts = [c for c in (10.0**j for j in range(-15, 16)) if lo < c < hi]
        edges = [lo] + pts + [hi]
        total = 0.0
        for x0, x1 in zip(edges[:-1], edges[1:]):
            val, _ = integrate.quad(self._g, x0, x1, epsabs=0.0, epsrel=1e-13, limit=200)
            total += val
        return total

    def _from_anchor_to_decade(self, j: int) -> float:
        """Integral from the anchor to 10^j (cached)."""
        hit = self._decades.get(j)
        if hit is None:
            hit = self._quad(self.anchor, 10.0**j) if 10.0**j >= self.anchor else -self._quad(10.0**j, self.anchor)
            self._decades[j] = hit
        return hit

    def phi_inv(self, u: float) -> float:
        """v = integral of f^(-1/(k-1)) from the anchor to u."""
        u = float(u)
        if self.identity:
            return u
        if self.classification == CONVERGENT:
            if u < 0:
                raise TransformError(f"u = {u!r} is outside the range [0, inf) of phi")
            if u == 0:
                return 0.0
        elif not u > 0:
            raise TransformError(f"u = {u!r} is outside the range (0, inf) of phi")
        j = int(math.floor(math.log10(u)))
        j = max(min(j, 15), -15)
        base = self._from_anchor_to_decade(j)
        d = 10.0**j
        return base + (self._quad(d, u) if u >= d else -self._quad(u, d))

    def phi(self, v: float) -> float:
        """u with phi_inv(u) = v: bracketed bisection, then Newton polish."""
        v = float(v)
        if self.identity:
            return v
        hit = self._phi_cache.get(v)
        if hit is not None:
            return hit
        if self.classification == CONVERGENT:
            if v < 0:
                raise TransformError(f"v = {v!r} is below the range of phi_inv")
            if v == 0:
                return 0.0
        hi = 1.0
        while self.phi_inv(hi) < v:
            hi *= 16.0
            if hi > 1e300:
                raise TransformError(f"no upper bracket for v = {v!r}")
        lo = hi / 16.0
        while self.phi_inv(lo) > v:
            lo /= 16.0
            if lo < 1e-300:
                raise TransformError(f"no lower bracket for v = {v!r}")
        # bisect in log u so small roots are resolved relatively
        F = lambda u: self.phi_inv(u) - v
        try:
            ends = {math.log(lo): lo, math.log(hi): hi}
            u = math.exp(bisect(lambda x: F(ends.get(x, math.exp(x))), math.log(lo), math.log(hi), tol=1e-7))
        except BracketError as exc:
            raise TransformError(f"phi({v!r}): {exc}") from exc
        for _ in range(30):
            du = F(u) / self._g(u)
            nu = u - du
            if not (lo <= nu <= hi) or not math.isfinite(nu):
                break
            u = nu
            if abs(du) <= 1e-15 * max(1.0, abs(u)):
                break
        self._phi_cache[v] = u
        return u

    def fprime_root(self, s: float) -> float:
        """d/ds f^(1/(k-1)), by callback or central difference."""
        if self.root_derivative is not None:
            return float(self.root_derivative(s))
        h = 1e-6 * (1 + abs(s))
        g = lambda x: _fval(self.f, x, allow_zero=True) ** (1.0 / (self.k - 1))
        if s - h < 0:
            return (g(s + h) - g(s)) / h
        return (g(s + h) - g(s - h)) / (2 * h)

    def Z(self, v: float) -> float:
        if self.identity:
            return 0.0
        return self.fprime_root(self.phi(v))

    def z_function(self) -> ZFunction:
        if self.identity:
            return ZFunction.zero()
        dom = 0.0 if self.classification == CONVERGENT else -math.inf
        fn = np.vectorize(self.Z, otypes=[float])
        return ZFunction("callable", fn=fn, domain_min=dom)


def build_phi(f: Callable, k: float, anchor: Optional[float] = None, classification: Optional[str] = None, root_derivative: Optional[Callable] = None) -> TransformSpec:
    """Build the transform; classification is computed unless supplied."""
    if k == 1:
        probe = np.asarray(f(np.linspace(0.0, 10.0, 11)), float) * np.ones(11)
        if not np.allclose(probe, 1.0):
            raise TransformError("k = 1 is only supported for f identically 1")
        return TransformSpec(f, 1.0, CONVERGENT, 0.0)
    if classification is None:
        classification = classify_F(f, k).label
    if classification == INCONCLUSIVE:
        raise TransformError("classification inconclusive; supply it explicitly")
    if classification not in (CONVERGENT, DIVERGENT):
        raise TransformError(f"unknown classification {classification!r}")
    if anchor is None:
        anchor = 0.0 if classification == CONVERGENT else 1.0
    return TransformSpec(f, float(k), classification, float(anchor), root_derivative)


def power_transform(family: PowerFamily, **kw) -> TransformSpec:
    label = DIVERGENT if (family.exponential and family.a == 0) else CONVERGENT
    return build_phi(family, family.k, classification=label, root_derivative=family.root_derivative, **kw)


# -- checks ----------------------------------------------------------------------


@dataclass
class SandwichReport:
    omega: float
    violations: int
    worst: float
    z_within: bool
    note: str = ""


def sandwich_check(f: Callable, k: float, omega1: float, omega2: float, s_grid=None, transform: Optional[TransformSpec] = None, tol: float = 1e-10) -> SandwichReport:
    """(omega1 s + omega)^(k-1) <= f(s) <= (omega2 s + omega)^(k-1), omega = f(0)^(1/(k-1))."""
    if not 0 < omega1 <= omega2:
        raise TransformError("need 0 < omega1 <= omega2")
    s = np.linspace(0.0, 10.0, 201) if s_grid is None else np.asarray(s_grid, float)
    omega = float(f(0.0)) ** (1.0 / (k - 1))
    fs = np.asarray(f(s), float) * np.ones_like(s)
    lo = (omega1 * s + omega) ** (k - 1)
    hi = (omega2 * s + omega) ** (k - 1)
    scale = np.maximum(1.0, np.abs(fs))
    gap = np.maximum(lo - fs, fs - hi) / scale
    note = ""
    if omega == 0:
        note = "omega = 0: anchor u0 = 1 (divergent branch)"
    fd = np.array([TransformSpec(f, k, CONVERGENT, 0.0).fprime_root(x) for x in s])
    if np.all(np.abs(fd) < 1e-12):
        note = "degenerate: Z identically 0 (f is not increasing)"
    z_within = bool(np.all(fd >= omega1 - 1e-6) and np.all(fd <= omega2 + 1e-6))
    return SandwichReport(omega, int(np.count_nonzero(gap > tol)), float(gap.max()), z_within, note)


@dataclass
class TransformedProblem:
    params: ProblemParams
    initial: Optional[Callable]
    route: str


def minimum_principle_route(transform: TransformSpec) -> str:
    """Barrier family used for the lower bound after transforming."""
    return "VI.i-1" if transform.classification == CONVERGENT else "V.I"


def transformed_problem(params: ProblemParams, transform: TransformSpec, initial: Optional[Callable] = None, probe=None) -> TransformedProblem:
    """Problem for v = phi^{-1}(u): same operator, chi = 0, Z from the transform.

    ``initial`` (a function of r) is mapped through phi^{-1}; values outside
    phi's range raise. ``probe`` radii are used to validate the data.
    """
    if params.alpha != 0:
        raise TransformError("the transformed problem assumes chi identically 0")
    new = replace(params, Z=transform.z_function(), sigma=0.0, spectral=params.spectral)
    mapped = None
    if initial is not None:
        pts = np.linspace(0.0, 10.0, 101) if probe is None else np.asarray(probe, float)
        vals = np.asarray(initial(pts), float) * np.ones_like(pts)
        for u in vals:
            transform.phi_inv(u)  # raises outside the range
        mapped = lambda r: np.array([transform.phi_inv(u) for u in np.atleast_1d(initial(r))])
    return TransformedProblem(new, mapped, minimum_principle_route(transform))
