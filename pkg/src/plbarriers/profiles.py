"""Radial profiles v(r) with closed-form derivatives.

Every profile exposes ``value``, ``d1``, ``d2`` (vectorized over r) and
``ratio(r) = r v''(r) / v'(r)``, the quantity that enters the rank-one
coefficient of the radial operator. ``lambda_lower`` is the infimum of
``1 - ratio`` over the domain, used to bound the operator from below.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate


class ProfileDomainError(ValueError):
    """Raised when a profile is evaluated outside its domain."""


def _arr(r):
    return np.asarray(r, dtype=float)


def _out(x, like):
    return float(x) if np.ndim(like) == 0 else x


@dataclass(frozen=True)
class RadialProfile:
    """Base class; subclasses implement the closed forms."""

    @property
    def kind(self) -> str:
        return type(self).__name__

    @property
    def domain_max(self) -> float:
        return math.inf

    @property
    def closed_end(self) -> bool:
        """Whether ``domain_max`` itself belongs to the domain."""
        return False

    def params(self) -> dict:
        return {}

    def _check(self, r) -> np.ndarray:
        r = _arr(r)
        if np.any(np.isnan(r)) or np.any(r < 0):
            raise ProfileDomainError(f"{self.kind}: radius must be >= 0")
        top = self.domain_max
        bad = r > top if self.closed_end else r >= top
        if np.any(bad):
            raise ProfileDomainError(f"{self.kind}: radius {float(np.max(r))!r} outside [0, {top!r})")
        return r

    def value(self, r):
        raise NotImplementedError

    def d1(self, r):
        raise NotImplementedError

    def d2(self, r):
        raise NotImplementedError

    def ratio(self, r):
        """r v''/v' for r > 0."""
        r = self._check(r)
        return _out(r * self.d2(r) / self.d1(r), r)

    def lambda_lower(self) -> float:
        raise NotImplementedError

    def describe(self) -> str:
        inner = ",".join(f"{k}={v:.6g}" for k, v in self.params().items())
        return f"{self.kind}({inner})"


@dataclass(frozen=True)
class Power(RadialProfile):
    """v = r^beta, beta > 1."""

    beta: float

    def __post_init__(self):
        if not self.beta > 1:
            raise ValueError("Power profile needs beta > 1")

    def params(self):
        return {"beta": self.beta}

    def value(self, r):
        r = self._check(r)
        return _out(r**self.beta, r)

    def d1(self, r):
        r = self._check(r)
        return _out(self.beta * r ** (self.beta - 1), r)

    def d2(self, r):
        r = self._check(r)
        with np.errstate(divide="ignore"):
            return _out(self.beta * (self.beta - 1) * r ** (self.beta - 2), r)

    def ratio(self, r):
        r = self._check(r)
        return _out(np.full(r.shape, self.beta - 1.0), r)

    def lambda_lower(self):
        return 2.0 - self.beta


# 12-point Gauss-Legendre rule for the bulk cumulative integral.
_GL_X, _GL_W = np.polynomial.legendre.leggauss(12)


@dataclass(frozen=True)
class RegularizedPower(RadialProfile):
    """v(r) = integral over [0, r^beta] of (1 + tau^p)^(-1), p = (beta - beta_bar)/beta.

    Behaves like r^beta near 0 and like r^beta_bar/(1-p) at infinity.
    """

    beta: float
    beta_bar: float
    _cache: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        if not 1 <= self.beta_bar < self.beta:
            raise ValueError("RegularizedPower needs 1 <= beta_bar < beta")

    @property
    def p(self) -> float:
        return (self.beta - self.beta_bar) / self.beta

    def params(self):
        return {"beta": self.beta, "beta_bar": self.beta_bar, "p": self.p}

    def _integrand(self, tau):
        return 1.0 / (1.0 + tau**self.p)

    def integral(self, x0: float, x1: float) -> float:
        """Adaptive quadrature of (1 + tau^p)^(-1) over [x0, x1] split at 1 and decades."""
        if x1 <= x0:
            return 0.0
        cuts = [x0]
        for c in [10.0**j for j in range(-12, 40)]:
            if x0 < c < x1:
                cuts.append(c)
        cuts.append(x1)
        total = 0.0
        for lo, hi in zip(cuts[:-1], cuts[1:]):
            val, _ = integrate.quad(self._integrand, lo, hi, epsabs=1e-13, epsrel=1e-13, limit=200)
            total += val
        return total

    def _scalar(self, r: float) -> float:
        r = float(r)
        hit = self._cache.get(r)
        if hit is None:
            hit = self.integral(0.0, r**self.beta)
            self._cache[r] = hit
        return hit

    def increment(self, r0: float, r1: float) -> float:
        """v(r1) - v(r0) computed directly (no cancellation)."""
        self._check([r0, r1])
        return self.integral(float(r0) ** self.beta, float(r1) ** self.beta)

    def _bulk(self, r: np.ndarray) -> np.ndarray:
        """Cumulative Gauss-Legendre in log r; anchored by one quadrature call."""
        out = np.zeros(r.shape)
        pos = r > 0
        if not pos.any():
            return out
        uniq, inv = np.unique(r[pos], return_inverse=True)
        s_pts = np.log(uniq)
        s_grid = np.arange(s_pts[0], s_pts[-1], 0.25)
        nodes = np.union1d(s_pts, s_grid)
        lo, hi = nodes[:-1], nodes[1:]
        mid, half = 0.5 * (hi + lo), 0.5 * (hi - lo)
        s = mid[:, None] + half[:, None] * _GL_X[None, :]
        rho_b = np.exp(self.beta * s)
        f = self.beta * rho_b / (1.0 + rho_b**self.p)
        inc = half * (f @ _GL_W)
        cum = np.concatenate([[0.0], np.cumsum(inc)]) + self._scalar(uniq[0])
        vals = cum[np.searchsorted(nodes, s_pts)]
        out[pos] = vals[inv]
        return out

    def value(self, r):
        r = self._check(r)
        if r.ndim == 0:
            return self._scalar(float(r))
        return self._bulk(r)

    def d1(self, r):
        r = self._check(r)
        return _out(self.beta * r ** (self.beta - 1) / (1.0 + r ** (self.p * self.beta)), r)

    def d2(self, r):
        r = self._check(r)
        x = r ** (self.p * self.beta)
        with np.errstate(divide="ignore", invalid="ignore"):
            num = self.beta * r ** (self.beta - 2) * ((self.beta - 1) + (self.beta_bar - 1) * x)
            return _out(num / (1.0 + x) ** 2, r)

    def ratio(self, r):
        r = self._check(r)
        x = r ** (self.p * self.beta)
        return _out(((self.beta - 1) + (self.beta_bar - 1) * x) / (1.0 + x), r)

    def lambda_lower(self):
        return 2.0 - self.beta


@dataclass(frozen=True)
class ExpSquare(RadialProfile):
    """v = exp(c r^2)."""

    c: float

    def __post_init__(self):
        if not self.c > 0:
            raise ValueError("ExpSquare needs c > 0")

    def params(self):
        return {"c": self.c}

    def value(self, r):
        r = self._check(r)
        return _out(np.exp(self.c * r * r), r)

    def d1(self, r):
        r = self._check(r)
        return _out(2 * self.c * r * np.exp(self.c * r * r), r)

    def d2(self, r):
        r = self._check(r)
        return _out((2 * self.c + 4 * self.c**2 * r * r) * np.exp(self.c * r * r), r)

    def ratio(self, r):
        r = self._check(r)
        return _out(1.0 + 2 * self.c * r * r, r)

    def lambda_lower(self):
        return -math.inf


@dataclass(frozen=True)
class ExpLinearReg(RadialProfile):
    """v = exp(c r) - 1 - c r."""

    c: float

    def __post_init__(self):
        if not self.c > 0:
            raise ValueError("ExpLinearReg needs c > 0")

    def params(self):
        return {"c": self.c}

    def value(self, r):
        r = self._check(r)
        x = self.c * r
        series = x * x * (1 / 2 + x * (1 / 6 + x * (1 / 24 + x * (1 / 120 + x / 720))))
        return _out(np.where(x < 1e-3, series, np.expm1(x) - x), r)

    def d1(self, r):
        r = self._check(r)
        return _out(self.c * np.expm1(self.c * r), r)

    def d2(self, r):
        r = self._check(r)
        return _out(self.c**2 * np.exp(self.c * r), r)

    def ratio(self, r):
        r = self._check(r)
        x = self.c * r
        return _out(x / -np.expm1(-x), r)

    def lambda_lower(self):
        return -math.inf


@dataclass(frozen=True)
class InverseGap(RadialProfile):
    """v = 1/(R^2 - r^2) on [0, R)."""

    R: float

    def __post_init__(self):
        if not self.R > 0:
            raise ValueError("InverseGap needs R > 0")

    @property
    def domain_max(self):
        return self.R

    def params(self):
        return {"R": self.R}

    def value(self, r):
        r = self._check(r)
        return _out(1.0 / (self.R**2 - r * r), r)

    def d1(self, r):
        r = self._check(r)
        g = self.R**2 - r * r
        return _out(2 * r / g**2, r)

    def d2(self, r):
        r = self._check(r)
        g = self.R**2 - r * r
        return _out(2 / g**2 + 8 * r * r / g**3, r)

    def ratio(self, r):
        r = self._check(r)
        return _out(1.0 + 4 * r * r / (self.R**2 - r * r), r)

    def lambda_lower(self):
        return -math.inf


@dataclass(frozen=True)
class CaseIProfile(RadialProfile):
    """v = (R^((k+1)/k) - r^((k+1)/k))^(k/(k-1)) on [0, R]; nonincreasing, v(R) = 0."""

    k: float
    R: float

    def __post_init__(self):
        if not self.k > 1:
            raise ValueError("CaseIProfile needs k > 1")
        if not self.R > 0:
            raise ValueError("CaseIProfile needs R > 0")

    @property
    def domain_max(self):
        return self.R

    @property
    def closed_end(self):
        return True

    def params(self):
        return {"k": self.k, "R": self.R}

    def _g(self, r):
        e = (self.k + 1) / self.k
        return np.maximum(self.R**e - r**e, 0.0)

    def value(self, r):
        r = self._check(r)
        return _out(self._g(r) ** (self.k / (self.k - 1)), r)

    def d1(self, r):
        r = self._check(r)
        k = self.k
        A = (k + 1) / (k - 1)
        return _out(-A * self._g(r) ** (1 / (k - 1)) * r ** (1 / k), r)

    def d2(self, r):
        r = self._check(r)
        k = self.k
        A = (k + 1) / (k - 1)
        g = self._g(r)
        with np.errstate(divide="ignore", invalid="ignore"):
            t1 = (k + 1) / (k * (k - 1)) * g ** ((2 - k) / (k - 1)) * r ** (2 / k)
            t2 = g ** (1 / (k - 1)) * r ** (1 / k - 1) / k
        return _out(A * (t1 - t2), r)

    def ratio(self, r):
        r = self._check(r)
        k = self.k
        return _out(1 / k - (k + 1) / (k * (k - 1)) * r ** ((k + 1) / k) / self._g(r), r)

    def lambda_lower(self):
        return 1.0 - 1.0 / self.k


@dataclass(frozen=True)
class Gaussian(RadialProfile):
    """v = exp(-E r^2); decreasing."""

    E: float

    def __post_init__(self):
        if not self.E > 0:
            raise ValueError("Gaussian needs E > 0")

    def params(self):
        return {"E": self.E}

    def value(self, r):
        r = self._check(r)
        return _out(np.exp(-self.E * r * r), r)

    def d1(self, r):
        r = self._check(r)
        return _out(-2 * self.E * r * np.exp(-self.E * r * r), r)

    def d2(self, r):
        r = self._check(r)
        return _out((4 * self.E**2 * r * r - 2 * self.E) * np.exp(-self.E * r * r), r)

    def ratio(self, r):
        r = self._check(r)
        return _out(1.0 - 2 * self.E * r * r, r)

    def lambda_lower(self):
        return 0.0


# -- inequality suite for the regularized power profile ---------------------------


@dataclass
class BoundRow:
    r: float
    quantity: str
    lhs: float
    rhs: float
    slack: float


@dataclass
class BoundsReport:
    rows: list
    violations: int
    worst_slack: float
    tol: float

    @property
    def passed(self) -> bool:
        return self.violations == 0


def bounds_rows(profile: RegularizedPower, r: float, R_anchor: float, k: float) -> list:
    """All checked inequalities at one radius, as (quantity, lhs, rhs) with lhs <= rhs expected."""
    if not R_anchor > 1:
        raise ValueError("R_anchor must exceed 1")
    beta, bb, p = profile.beta, profile.beta_bar, profile.p
    gamma = k + 1.0
    v = profile.value(r)
    d1 = profile.d1(r)
    out = [
        ("iii_lower", r**beta / (1 + r ** (beta * p)), v),
        ("iii_upper", v, min(r**beta, r**bb / (1 - p))),
        ("v_slope", d1, beta * min(r ** (bb - 1), r ** (beta - 1))),
    ]
    if r > 0:
        out.append(("vi_power", d1**k / r, beta**k * min(r ** (k * beta - gamma), r ** (k * bb - gamma))))
    if r >= R_anchor:
        if r > R_anchor * (1 + 1e-9):
            ratio = profile.increment(R_anchor, r) / (r**bb - R_anchor**bb)
        else:
            ratio = profile.d1(R_anchor) / (bb * R_anchor ** (bb - 1))
        out.append(("iv_lower", 1 / (2 * (1 - p)), ratio))
        out.append(("iv_upper", ratio, 1 / (1 - p)))
    return out


def bounds_suite(profile: RegularizedPower, r_samples, R_anchor: float, k: float, tol: float = 1e-10) -> BoundsReport:
    """Check the two-sided growth bounds, the far-field sandwich and the derivative bounds.

    A row is a violation when lhs exceeds rhs by more than tol * max(1, |rhs|).
    """
    rows = []
    violations = 0
    worst = math.inf
    for r in np.asarray(r_samples, dtype=float):
        for name, lhs, rhs in bounds_rows(profile, float(r), R_anchor, k):
            slack = rhs - lhs
            rel = slack / max(1.0, abs(rhs))
            worst = min(worst, rel)
            if rel < -tol:
                violations += 1
            rows.append(BoundRow(float(r), name, float(lhs), float(rhs), float(slack)))
    return BoundsReport(rows, violations, worst, tol)
