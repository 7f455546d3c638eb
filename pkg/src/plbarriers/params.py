"""Problem parameters shared by the barrier, certifier and lab modules."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .operators import OperatorSpec, SpectralReport, estimate_lambda_sup_inf


class ParamsError(ValueError):
    """Raised for inconsistent problem parameters."""


class ZDomainError(ValueError):
    """Raised when Z is evaluated outside its declared domain."""


@dataclass(frozen=True)
class ZFunction:
    """A nonnegative, nonincreasing scalar function with a declared domain.

    Kinds: ``zero`` (Z = 0), ``zero_above`` (scale * max(s0 - s, 0)),
    ``power_decay`` (scale / (1 + s)^power on [0, inf)), ``table``
    (piecewise linear through the given knots, constant beyond them) and
    ``callable`` (user function ``fn`` with explicit ``domain_min``).
    """

    kind: str = "zero"
    s0: float = 0.0
    scale: float = 1.0
    power: float = 1.0
    table_s: tuple = ()
    table_z: tuple = ()
    domain_min: float = -math.inf
    fn: Optional[Callable] = field(default=None, compare=False)

    def __post_init__(self):
        if self.kind not in ("zero", "zero_above", "power_decay", "table", "callable"):
            raise ParamsError(f"Z.kind: unknown kind {self.kind!r}")
        if self.kind in ("zero_above", "power_decay") and self.scale < 0:
            raise ParamsError("Z.scale must be nonnegative")
        if self.kind == "power_decay":
            if self.power < 0:
                raise ParamsError("Z.power must be nonnegative")
            object.__setattr__(self, "domain_min", max(self.domain_min, 0.0))
        if self.kind == "table":
            s = np.asarray(self.table_s, float)
            z = np.asarray(self.table_z, float)
            if s.ndim != 1 or s.shape != z.shape or len(s) < 1:
                raise ParamsError("Z.table: knots and values must be equal-length lists")
            if np.any(np.diff(s) <= 0):
                raise ParamsError("Z.table: knots must be strictly increasing")
            if np.any(np.diff(z) > 0) or np.any(z < 0):
                raise ParamsError("Z.table: values must be nonnegative and nonincreasing")
            object.__setattr__(self, "table_s", tuple(s.tolist()))
            object.__setattr__(self, "table_z", tuple(z.tolist()))
            object.__setattr__(self, "domain_min", max(self.domain_min, float(s[0])))
        if self.kind == "callable" and self.fn is None:
            raise ParamsError("Z.fn is required for kind 'callable'")

    @classmethod
    def zero(cls) -> "ZFunction":
        return cls("zero")

    @classmethod
    def zero_above(cls, s0: float, scale: float = 1.0) -> "ZFunction":
        return cls("zero_above", s0=s0, scale=scale)

    @classmethod
    def power_decay(cls, scale: float, power: float) -> "ZFunction":
        return cls("power_decay", scale=scale, power=power, domain_min=0.0)

    @classmethod
    def table(cls, s, z) -> "ZFunction":
        return cls("table", table_s=tuple(s), table_z=tuple(z))

    @property
    def identically_zero(self) -> bool:
        return self.kind == "zero" or (self.kind in ("zero_above", "power_decay") and self.scale == 0)

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        if np.any(s < self.domain_min):
            worst = float(np.min(s))
            raise ZDomainError(f"Z evaluated at {worst!r}, below its domain minimum {self.domain_min!r}")
        if self.kind == "zero":
            return np.zeros_like(s)
        if self.kind == "zero_above":
            return self.scale * np.maximum(self.s0 - s, 0.0)
        if self.kind == "power_decay":
            return self.scale * (1.0 + s) ** (-self.power)
        if self.kind == "table":
            return np.interp(s, self.table_s, self.table_z)
        return np.asarray(self.fn(s), dtype=float)

    def check_nonincreasing(self, lo: float = -1e3, hi: float = 1e3, count: int = 2001, tol: float = 1e-10) -> bool:
        lo = max(lo, self.domain_min)
        s = np.linspace(lo, hi, count)
        z = self(s)
        return bool(np.all(np.diff(z) <= tol * np.maximum(1.0, np.abs(z[:-1]))))


@dataclass(frozen=True)
class ChiProfile:
    """Time coefficient of the first-order term: const, sin or table."""

    kind: str = "const"
    value: float = 0.0
    omega: float = 1.0
    table_t: tuple = ()
    table_chi: tuple = ()

    def __post_init__(self):
        if self.kind not in ("const", "sin", "table"):
            raise ParamsError(f"chi_profile.kind: unknown kind {self.kind!r}")
        if self.kind == "table":
            if len(self.table_t) != len(self.table_chi) or len(self.table_t) < 1:
                raise ParamsError("chi_profile.table: times and values must be equal-length lists")

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if self.kind == "const":
            return np.full(t.shape, float(self.value))
        if self.kind == "sin":
            return self.value * np.sin(self.omega * t)
        return np.interp(t, self.table_t, self.table_chi)

    def sup_abs(self, T: float) -> float:
        if self.kind == "const":
            return abs(self.value)
        if self.kind == "table":
            ts = np.asarray(self.table_t)
            inside = np.concatenate([[0.0, T], ts[(ts >= 0) & (ts <= T)]])
            return float(np.abs(self(inside)).max())
        # Peak of |sin| on [0, T]: either reached or the endpoint value.
        if self.omega * T >= math.pi / 2:
            return abs(self.value)
        return abs(self.value * math.sin(self.omega * T))


@dataclass(frozen=True)
class ProblemParams:
    """Data of the parabolic problem H(Du, D^2u + Z(u)Du⊗Du) + chi(t)|Du|^sigma = u_t.

    ``M`` defaults to max(Lambda^sup, 1) computed by a spectral sweep; a
    larger user value is accepted (any upper bound works for the barriers).
    ``N`` optionally overrides the global lower spectral bound used when a
    case needs it.
    """

    op: OperatorSpec
    sigma: float = 0.0
    T: float = 1.0
    alpha: float = 0.0
    alpha_hat_neg: Optional[float] = None
    alpha_hat_pos: Optional[float] = None
    Z: ZFunction = field(default_factory=ZFunction.zero)
    z_center: Optional[tuple] = None
    M: Optional[float] = None
    N: Optional[float] = None
    chi: Optional[ChiProfile] = None
    spectral: Optional[SpectralReport] = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.sigma < 0:
            raise ParamsError("sigma must be nonnegative")
        if not (0 < self.T < math.inf):
            raise ParamsError("T must be positive and finite")
        if self.alpha < 0:
            raise ParamsError("alpha must be nonnegative")
        if self.alpha_hat_neg is not None and not self.alpha_hat_neg < 0:
            raise ParamsError("alpha_hat_neg must be negative")
        if self.alpha_hat_pos is not None and not self.alpha_hat_pos >= 0:
            raise ParamsError("alpha_hat_pos must be nonnegative")
        if self.z_center is None:
            object.__setattr__(self, "z_center", (0.0,) * self.op.n)
        if len(self.z_center) != self.op.n:
            raise ParamsError("z_center has the wrong dimension")
        object.__setattr__(self, "z_center", tuple(float(x) for x in self.z_center))
        if self.chi is None:
            object.__setattr__(self, "chi", ChiProfile("const", self.alpha))
        elif abs(self.chi.sup_abs(self.T) - self.alpha) > 1e-12:
            raise ParamsError(
                f"chi_profile: sup|chi| = {self.chi.sup_abs(self.T)!r} does not match alpha = {self.alpha!r}"
            )
        if self.spectral is None:
            object.__setattr__(self, "spectral", estimate_lambda_sup_inf(self.op))
        lam_sup = self.spectral.lambda_sup
        if not math.isfinite(lam_sup):
            raise ParamsError(f"operator {self.op.name} has unbounded Lambda^sup")
        M_min = max(lam_sup, 1.0)
        if self.M is None:
            object.__setattr__(self, "M", M_min)
        elif self.M < M_min * (1 - 1e-12):
            raise ParamsError(f"M = {self.M!r} is below max(Lambda^sup, 1) = {M_min!r}")
        if self.N is not None and self.N > 0:
            raise ParamsError("N must be nonpositive")

    @property
    def n(self) -> int:
        return self.op.n

    @property
    def k(self) -> float:
        return self.op.k

    @property
    def gamma(self) -> float:
        return self.op.gamma

    @property
    def gamma_star(self) -> float:
        if self.k <= 1:
            raise ParamsError("gamma* is only defined for k > 1")
        return self.gamma / (self.gamma - 2.0)

    @property
    def sigma_star(self) -> float:
        if self.sigma <= 1:
            raise ParamsError("sigma* is only defined for sigma > 1")
        return self.sigma / (self.sigma - 1.0)

    @property
    def lambda_inf(self) -> float:
        """Global lower spectral bound (user override or sweep estimate)."""
        if self.N is not None:
            return self.N
        return self.spectral.lambda_inf
