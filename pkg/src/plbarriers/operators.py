"""Degenerate elliptic operators H(q, X) and their rank-one spectral data.

Two built-in families are provided, plus a wrapper for user supplied
evaluators:

* ``grad_trace_minus_infinity``: H(q, X) = |q|^p (|q|^2 tr X - q^T X q)
* ``truncated_eigen_sum``: H(q, X) = |q|^p (mu_m + ... + mu_n) where
  mu_1 >= ... >= mu_n are the eigenvalues of X
* ``custom``: any callable ``evaluator(q, X)`` with a declared degree k1
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.special import ndtri
from scipy.stats import qmc

GRAD_TRACE = "grad_trace_minus_infinity"
TRUNCATED_EIG = "truncated_eigen_sum"
CUSTOM = "custom"
BUILTIN_KINDS = (GRAD_TRACE, TRUNCATED_EIG)

# Tail slope below which a spectral bound is declared finite.
TAIL_SLOPE_THRESHOLD = 1e-6


class OperatorError(ValueError):
    """Raised for malformed operators or arguments."""


def sym_matrix(entries) -> np.ndarray:
    """Return ``entries`` as a validated symmetric float matrix (n >= 2)."""
    X = np.array(entries, dtype=float)
    if X.ndim != 2 or X.shape[0] != X.shape[1]:
        raise OperatorError(f"matrix must be square, got shape {X.shape}")
    if X.shape[0] < 2:
        raise OperatorError("matrix dimension must be at least 2")
    if not np.all(np.isfinite(X)):
        raise OperatorError("matrix has non-finite entries")
    if not np.array_equal(X, X.T):
        raise OperatorError("matrix is not exactly symmetric")
    return X


def _abs_pow(x, p: float):
    """|x|^p with the convention |0|^0 = 1."""
    x = np.abs(x)
    if p == 0:
        return np.ones_like(x, dtype=float)
    return x**p


@dataclass(frozen=True)
class OperatorSpec:
    """A degenerate elliptic operator with its homogeneity metadata.

    ``k1`` is the degree of homogeneity in the gradient. For the built-in
    families it is derived from ``p``; custom operators must declare it.
    """

    kind: str
    n: int
    p: float = 0.0
    m: Optional[int] = None
    k1: Optional[float] = None
    evaluator: Optional[Callable[[np.ndarray, np.ndarray], float]] = field(
        default=None, compare=False
    )
    name: str = ""

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 2:
            raise OperatorError(f"dimension n must be an integer >= 2, got {self.n}")
        object.__setattr__(self, "n", int(self.n))
        if self.kind == GRAD_TRACE:
            if self.p < 0:
                raise OperatorError("p must be nonnegative")
            object.__setattr__(self, "k1", float(self.p) + 2.0)
        elif self.kind == TRUNCATED_EIG:
            if self.p < 0:
                raise OperatorError("p must be nonnegative")
            if self.m is None or int(self.m) != self.m or not 2 <= self.m < self.n:
                raise OperatorError(f"m must be an integer with 2 <= m < n, got {self.m}")
            object.__setattr__(self, "m", int(self.m))
            object.__setattr__(self, "k1", float(self.p))
        elif self.kind == CUSTOM:
            if self.evaluator is None:
                raise OperatorError("custom operator needs an evaluator")
            if self.k1 is None or self.k1 < 0:
                raise OperatorError("custom operator needs a declared k1 >= 0")
            object.__setattr__(self, "k1", float(self.k1))
        else:
            raise OperatorError(f"unknown operator kind {self.kind!r}")
        if not self.name:
            object.__setattr__(self, "name", self._default_name())

    def _default_name(self) -> str:
        if self.kind == GRAD_TRACE:
            return f"grad_trace(p={self.p:g},n={self.n})"
        if self.kind == TRUNCATED_EIG:
            return f"truncated_eig(p={self.p:g},m={self.m},n={self.n})"
        return f"custom(k1={self.k1:g},n={self.n})"

    @property
    def k(self) -> float:
        return self.k1 + 1.0

    @property
    def gamma(self) -> float:
        return self.k1 + 2.0

    @property
    def builtin(self) -> bool:
        return self.kind in BUILTIN_KINDS

    def __call__(self, q, X) -> float:
        return eval_H(self, q, X)

    # -- vectorized helpers -------------------------------------------------

    def eval_batch(self, Q: np.ndarray, Xs: np.ndarray) -> np.ndarray:
        """Evaluate H row-wise for stacks ``Q`` (N, n) and ``Xs`` (N, n, n).

        No validation is done here; callers supply well-formed arrays.
        """
        if self.kind == GRAD_TRACE:
            nq2 = np.einsum("ij,ij->i", Q, Q)
            tr = np.trace(Xs, axis1=1, axis2=2)
            qXq = np.einsum("ij,ijk,ik->i", Q, Xs, Q)
            return _abs_pow(np.sqrt(nq2), self.p) * (nq2 * tr - qXq)
        if self.kind == TRUNCATED_EIG:
            mu = np.linalg.eigvalsh(Xs)  # ascending
            tail = mu[:, : self.n - self.m + 1].sum(axis=1)
            return _abs_pow(np.linalg.norm(Q, axis=1), self.p) * tail
        return np.array([float(self.evaluator(q, X)) for q, X in zip(Q, Xs)])

    def rank_one(self, lam, sign: float) -> np.ndarray:
        """H(e, lam e⊗e + sign I) for a unit vector e.

        Built-in families are e-independent and use closed forms; custom
        operators are evaluated at the first coordinate axis.
        """
        lam = np.asarray(lam, dtype=float)
        if self.kind == GRAD_TRACE:
            return np.full(lam.shape, sign * (self.n - 1.0))
        if self.kind == TRUNCATED_EIG:
            return sign * (self.n - self.m + 1.0) + np.minimum(lam, 0.0)
        flat = lam.ravel()
        e = np.zeros(self.n)
        e[0] = 1.0
        E = np.outer(e, e)
        out = np.array([float(self.evaluator(e, l * E + sign * np.eye(self.n))) for l in flat])
        return out.reshape(lam.shape)

    def radial_G(self, r, q, s) -> np.ndarray:
        """H(q e, (q/r) I + (s - q/r) e⊗e): the operator on a radial function.

        Here ``q`` is the radial derivative and ``s`` the second radial
        derivative including any Z(u) q^2 correction. At ``r == 0`` the
        matrix is taken to be s I with zero gradient.
        """
        r, q, s = np.broadcast_arrays(
            np.asarray(r, float), np.asarray(q, float), np.asarray(s, float)
        )
        centre = r == 0
        with np.errstate(divide="ignore", invalid="ignore"):
            a = np.where(centre, s, q / np.where(centre, 1.0, r))
        if self.kind == GRAD_TRACE:
            pref = _abs_pow(q, self.p)
            return np.where(centre, 0.0, (self.n - 1.0) * pref * q * q * a)
        if self.kind == TRUNCATED_EIG:
            pref = _abs_pow(q, self.p)
            return pref * ((self.n - self.m) * a + np.minimum(a, s))
        e = np.zeros(self.n)
        e[0] = 1.0
        E = np.outer(e, e)
        eye = np.eye(self.n)
        flat = [
            float(self.evaluator(qi * e, ai * eye + (si - ai) * E))
            for qi, ai, si in zip(q.ravel(), a.ravel(), s.ravel())
        ]
        return np.array(flat).reshape(r.shape)


def grad_trace(n: int, p: float = 0.0) -> OperatorSpec:
    return OperatorSpec(GRAD_TRACE, n, p=p)


def truncated_eigen_sum(n: int, m: int, p: float = 0.0) -> OperatorSpec:
    return OperatorSpec(TRUNCATED_EIG, n, p=p, m=m)


def custom(n: int, evaluator, k1: float, name: str = "") -> OperatorSpec:
    return OperatorSpec(CUSTOM, n, k1=k1, evaluator=evaluator, name=name)


def median_eigenvalue(n: int = 3) -> OperatorSpec:
    """H(q, X) = middle eigenvalue of X (n odd); k1 = 0 with both spectral bounds finite."""
    if n % 2 == 0:
        raise OperatorError("median eigenvalue operator needs odd n")

    def evaluator(q, X):
        return float(np.linalg.eigvalsh(X)[n // 2])

    return custom(n, evaluator, 0.0, name=f"median_eig(n={n})")


def eval_H(op: OperatorSpec, q, X) -> float:
    """Evaluate H(q, X) after validating shapes, finiteness and symmetry."""
    q = np.asarray(q, dtype=float)
    if q.shape != (op.n,):
        raise OperatorError(f"gradient has shape {q.shape}, expected ({op.n},)")
    if not np.all(np.isfinite(q)):
        raise OperatorError("gradient has non-finite entries")
    X = sym_matrix(X)
    if X.shape != (op.n, op.n):
        raise OperatorError(f"matrix has shape {X.shape}, expected ({op.n}, {op.n})")
    if op.kind == CUSTOM:
        return float(op.evaluator(q, X))
    return float(op.eval_batch(q[None, :], X[None, :, :])[0])


def sphere_points(n: int, count: int, seed: int = 0) -> np.ndarray:
    """Unit vectors: the coordinate axes (both signs) plus low-discrepancy points."""
    axes = np.vstack([np.eye(n), -np.eye(n)])
    extra = max(count - len(axes), 0)
    if extra == 0:
        return axes[: max(count, 1)]
    sob = qmc.Halton(d=n, scramble=True, seed=seed)
    u = sob.random(extra)
    u = np.clip(u, 1e-12, 1 - 1e-12)
    g = ndtri(u)
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    return np.vstack([axes, g])


def rank_one_samples(op: OperatorSpec, lam: float, sign: float, E: np.ndarray) -> np.ndarray:
    """H(e, lam e⊗e + sign I) evaluated by direct assembly at each row of E."""
    outer = np.einsum("ij,ik->ijk", E, E)
    Xs = lam * outer + sign * np.eye(op.n)[None, :, :]
    # e⊗e built by einsum is exactly symmetric, so the batch path is safe.
    return op.eval_batch(E, Xs)


def lambda_extremes(op: OperatorSpec, lam: float, sphere_samples: int = 64, seed: int = 0):
    """Return (Lambda_min(lam), Lambda_max(lam)) over sampled unit vectors."""
    if sphere_samples < 1:
        raise OperatorError("sphere_samples must be >= 1")
    E = sphere_points(op.n, sphere_samples, seed)
    lo = rank_one_samples(op, lam, -1.0, E)
    hi = rank_one_samples(op, lam, 1.0, E)
    return float(lo.min()), float(hi.max())


@dataclass
class SpectralReport:
    lambda_grid: np.ndarray
    lambda_min_values: np.ndarray
    lambda_max_values: np.ndarray
    lambda_sup: float
    lambda_inf: float
    upper_slope: float
    lower_slope: float
    monotone: bool
    e_spread: float
    sphere_samples: int

    @property
    def sup_finite(self) -> bool:
        return math.isfinite(self.lambda_sup)

    @property
    def inf_finite(self) -> bool:
        return math.isfinite(self.lambda_inf)


def _tail_slope(lams: np.ndarray, vals: np.ndarray, upper: bool) -> float:
    """Least-squares slope over the last decade of |lambda| on one side."""
    edge = lams[-1] if upper else lams[0]
    if edge > 0 and upper:
        mask = lams >= edge / 10.0
    elif edge < 0 and not upper:
        mask = lams <= edge / 10.0
    else:
        count = max(len(lams) // 10, 2)
        mask = np.zeros(len(lams), bool)
        if upper:
            mask[-count:] = True
        else:
            mask[:count] = True
    if mask.sum() < 2:
        mask = np.zeros(len(lams), bool)
        mask[-2:] = upper
        mask[:2] = not upper
    slope = np.polyfit(lams[mask], vals[mask], 1)[0]
    return float(slope)


def estimate_lambda_sup_inf(
    op: OperatorSpec,
    lambda_range=(-1e3, 1e3),
    steps: int = 201,
    sphere_samples: int = 64,
    seed: int = 0,
    threshold: float = TAIL_SLOPE_THRESHOLD,
    mono_tol: float = 1e-9,
) -> SpectralReport:
    """Sweep lambda and decide whether Lambda^sup and Lambda^inf are finite."""
    lo, hi = map(float, lambda_range)
    if not (math.isfinite(lo) and math.isfinite(hi)) or lo >= hi:
        raise OperatorError(f"invalid lambda range {lambda_range}")
    if steps < 2:
        raise OperatorError("steps must be >= 2")
    grid = np.linspace(lo, hi, steps)
    E = sphere_points(op.n, sphere_samples, seed)
    mins = np.empty(steps)
    maxs = np.empty(steps)
    spread = 0.0
    for i, lam in enumerate(grid):
        a = rank_one_samples(op, lam, -1.0, E)
        b = rank_one_samples(op, lam, 1.0, E)
        mins[i], maxs[i] = a.min(), b.max()
        for v in (a, b):
            scale = max(1.0, float(np.abs(v).max()))
            spread = max(spread, float(v.max() - v.min()) / scale)
    up = _tail_slope(grid, maxs, upper=True)
    down = _tail_slope(grid, mins, upper=False)
    lam_sup = float(maxs[-1]) if up < threshold else math.inf
    lam_inf = float(mins[0]) if down < threshold else -math.inf
    scale = max(1.0, float(np.abs(np.concatenate([mins, maxs])).max()))
    monotone = bool(
        np.all(np.diff(maxs) >= -mono_tol * scale) and np.all(np.diff(mins) >= -mono_tol * scale)
    )
    return SpectralReport(
        lambda_grid=grid,
        lambda_min_values=mins,
        lambda_max_values=maxs,
        lambda_sup=lam_sup,
        lambda_inf=lam_inf,
        upper_slope=up,
        lower_slope=down,
        monotone=monotone,
        e_spread=spread,
        sphere_samples=len(E),
    )


@dataclass
class ConditionResult:
    name: str
    passed: bool
    violations: int
    worst: float


@dataclass
class ConditionReport:
    operator: str
    trials: int
    results: dict

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results.values())


def _random_sym(rng: np.random.Generator, count: int, n: int, scale: float = 3.0) -> np.ndarray:
    A = rng.normal(scale=scale, size=(count, n, n))
    return 0.5 * (A + np.transpose(A, (0, 2, 1)))


def check_conditions(
    op: OperatorSpec, trials: int = 10_000, seed: int = 0, tol: float = 1e-9, sphere_samples: int = 64
) -> ConditionReport:
    """Randomized checks of monotonicity (A), homogeneity (B) and nondegeneracy (C)."""
    if trials < 1:
        raise OperatorError("trials must be >= 1")
    rng = np.random.default_rng(seed)
    n = op.n
    Q = rng.normal(size=(trials, n)) * rng.uniform(0.1, 3.0, size=(trials, 1))
    X = _random_sym(rng, trials, n)
    B = rng.normal(size=(trials, n, n))
    P = np.einsum("ijk,ilk->ijl", B, B)
    P = 0.5 * (P + np.transpose(P, (0, 2, 1)))
    qn = np.linalg.norm(Q, axis=1)
    xn = np.linalg.norm(X, ord=2, axis=(1, 2))
    # Natural magnitude of H at (q, X); used as the relative scale.
    mag = _abs_pow(qn, op.k1) * n * (xn + 1e-300)

    results = {}
    h0 = op.eval_batch(Q, X)
    h1 = op.eval_batch(Q, X + P)
    scaleA = np.maximum.reduce([np.ones(trials), np.abs(h0), np.abs(h1), mag])
    excess = (h0 - h1) / scaleA
    bad = excess > tol
    results["A"] = ConditionResult("A", not bad.any(), int(bad.sum()), float(max(excess.max(), 0.0)))

    theta = rng.uniform(-10.0, 10.0, size=trials)
    theta[theta == 0] = 1.0
    hq = op.eval_batch(theta[:, None] * Q, X)
    gap_q = np.abs(hq - np.abs(theta) ** op.k1 * h0) / (np.abs(theta) ** op.k1 * mag)
    tpos = rng.uniform(1e-3, 10.0, size=trials)
    hx = op.eval_batch(Q, tpos[:, None, None] * X)
    gap_x = np.abs(hx - tpos * h0) / (tpos * mag)
    gap = np.maximum(gap_q, gap_x)
    bad = gap > tol
    results["B"] = ConditionResult("B", not bad.any(), int(bad.sum()), float(gap.max()))

    E = sphere_points(n, sphere_samples, seed)
    lo = rank_one_samples(op, 0.0, -1.0, E).max()
    hi = rank_one_samples(op, 0.0, 1.0, E).min()
    okC = lo < 0.0 < hi
    results["C"] = ConditionResult("C", bool(okC), 0 if okC else 1, float(max(lo, -hi)))
    return ConditionReport(op.name, trials, results)
