"""Monotone explicit finite differences for radial solutions on a ball.

The radial equation is

    u_t = G(r, u_r, u_rr + Z(u) u_r^2) + chi(t) |u_r|^sigma

where G(r, q, s) = H(q e, (q/r) I + (s - q/r) e⊗e). The second-order
part uses central differences plus a local Lax-Friedrichs viscosity
(theta h / 2) u_rr with theta bounding |dG/dq|; the first-order chi term
is upwinded by the sign of chi. Node 0 is the centre (ghost value
u_{-1} = u_1) and the last node carries Dirichlet data. Under the CFL
restriction computed each step the update is monotone, so ordered data
stay ordered.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .barriers import BarrierSpec
from .operators import GRAD_TRACE, TRUNCATED_EIG
from .params import ProblemParams

# Safety factor on the Lax-Friedrichs coefficient.
THETA_FACTOR = 1.25
# Each run takes at least this many steps so time traces are resolved.
MIN_STEPS = 20


class SimulationError(RuntimeError):
    """Raised on CFL violations or non-finite values."""


@dataclass
class RadialGridField:
    R: float
    h: float
    values: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        expected = int(round(self.R / self.h)) + 1
        if len(self.values) != expected or abs((expected - 1) * self.h - self.R) > 1e-9 * self.R:
            raise SimulationError(f"grid of {len(self.values)} nodes does not match R={self.R}, h={self.h}")
        if not np.all(np.isfinite(self.values)):
            raise SimulationError("field has non-finite values")

    @property
    def r(self) -> np.ndarray:
        return self.h * np.arange(len(self.values))

    @classmethod
    def from_function(cls, R: float, h: float, fn: Callable, t: float = 0.0) -> "RadialGridField":
        n = int(round(R / h)) + 1
        r = h * np.arange(n)
        return cls(R, h, np.asarray(fn(r), dtype=float) * np.ones(n), t)


@dataclass(frozen=True)
class SchemeConfig:
    h: float
    t_end: float
    dt: Optional[float] = None
    cfl_safety: float = 0.5
    q_bound: Optional[float] = None
    max_dt: Optional[float] = None

    def __post_init__(self):
        if not self.h > 0:
            raise SimulationError("h must be positive")
        if not self.t_end > 0:
            raise SimulationError("t_end must be positive")
        if not 0 < self.cfl_safety < 1:
            raise SimulationError("cfl_safety must lie in (0, 1)")
        if self.dt is not None and not self.dt > 0:
            raise SimulationError("dt must be positive")


# -- discrete operator ----------------------------------------------------------------


def _differences(u: np.ndarray, h: float):
    """Differences at nodes 0..N-2 (all but the boundary), ghost u_{-1} = u_1."""
    ext = np.concatenate([[u[1]], u])
    left, mid, right = ext[:-2], ext[1:-1], ext[2:]
    qc = (right - left) / (2 * h)
    s = (right - 2 * mid + left) / (h * h)
    dp = (right - mid) / h
    dm = (mid - left) / h
    return qc, s, dp, dm


def _upwind_grad(dp, dm, chi: float):
    if chi >= 0:
        return np.sqrt(np.minimum(dm, 0.0) ** 2 + np.maximum(dp, 0.0) ** 2)
    return np.sqrt(np.maximum(dm, 0.0) ** 2 + np.minimum(dp, 0.0) ** 2)


def _bounds(params: ProblemParams, r, Q, S, Zmax):
    """Upper bounds of |dG/dq| and dG/ds at radii r > 0 given local |q| <= Q, |s| <= S."""
    op = params.op
    n, p = op.n, op.p
    rr = r
    if op.kind == GRAD_TRACE:
        gq = (n - 1) * (p + 3) * Q ** (p + 2) / rr
        gs = np.zeros_like(Q)
        return gq, gs
    if op.kind == TRUNCATED_EIG:
        c = n - op.m + 1
        lead = (c / rr + 2 * Zmax * Q) * (Q**p if p else 1.0)
        if p:
            with np.errstate(divide="ignore", invalid="ignore"):
                extra = p * np.where(Q > 0, Q ** (p - 1), 0.0) * (c * Q / rr + S + Zmax * Q * Q)
            lead = lead + extra
        gs = Q**p if p else np.ones_like(Q)
        return lead, gs
    # Custom operators: secant slopes over a small stencil of q and s values.
    gq = np.zeros_like(Q)
    gs = np.zeros_like(Q)
    for frac in np.linspace(-1.0, 1.0, 9):
        q0 = frac * Q
        dq = 1e-6 * (1 + Q)
        for sv in (-S, 0.0, S):
            g0 = op.radial_G(r, q0, sv + Zmax * q0 * q0)
            g1 = op.radial_G(r, q0 + dq, sv + Zmax * (q0 + dq) ** 2)
            gq = np.maximum(gq, np.abs(g1 - g0) / dq)
            ds = 1e-6 * (1 + S)
            g2 = op.radial_G(r, q0, sv + ds + Zmax * q0 * q0)
            gs = np.maximum(gs, np.abs(g2 - g0) / ds)
    return gq, gs


def _node_inputs(u: np.ndarray, r: np.ndarray, h: float):
    """Operator arguments at nodes 0..N-2.

    The centre node is evaluated at the half node r = h/2 with the
    one-sided slope (u_1 - u_0)/h, so q/r equals the symmetric second
    difference there. This keeps the update consistent (it reduces to
    H(0, u_rr I) for smooth data) and monotone, and it lets a front that
    reaches the centre move the centre value.
    """
    qc, s, dp, dm = _differences(u, h)
    qc[0] = dp[0]
    r_eff = r[:-1].copy()
    r_eff[0] = 0.5 * h
    return qc, s, dp, dm, r_eff


def stability(params: ProblemParams, fields, r: np.ndarray, h: float, chi: float, q_bound=None):
    """(theta per non-boundary node, Lipschitz bound of the update) for one or more fields."""
    Q = np.zeros(len(r) - 1)
    S = 0.0
    lo, hi = math.inf, -math.inf
    for u in fields:
        _, s, dp, dm, r_eff = _node_inputs(u, r, h)
        Q = np.maximum(Q, np.maximum(np.abs(dp), np.abs(dm)))
        S = max(S, float(np.abs(s).max()))
        lo, hi = min(lo, float(u.min())), max(hi, float(u.max()))
    if q_bound is not None:
        Q = np.maximum(Q, q_bound)
    span = np.linspace(lo, hi, 33) if hi > lo else np.array([lo])
    Zvals = params.Z(span)
    Zmax = float(Zvals.max())
    LZ = float(np.max(np.abs(np.diff(Zvals)) / np.diff(span))) if len(span) > 1 else 0.0
    gq, gs = _bounds(params, r_eff, Q, S, Zmax)
    theta = THETA_FACTOR * gq
    lip = 2 * gs / (h * h) + theta / h + gs * LZ * Q * Q
    # At the centre q also depends on u_0, adding |dG/dq|/h.
    lip[0] += gq[0] / h
    if params.sigma > 0 and chi != 0:
        sig = params.sigma
        gmag = np.maximum(Q, h) if sig < 1 else Q
        lip = lip + 2 * abs(chi) * sig * gmag ** (sig - 1) / h
    return theta, float(lip.max())


def rhs(params: ProblemParams, u: np.ndarray, r: np.ndarray, h: float, chi: float, theta: np.ndarray) -> np.ndarray:
    """Discrete right-hand side at every node (the boundary entry is ignored)."""
    q, s, dp, dm, r_eff = _node_inputs(u, r, h)
    Zu = params.Z(u[:-1])
    G = params.op.radial_G(r_eff, q, s + Zu * q * q)
    F = G + 0.5 * theta * h * s
    if params.sigma == 0:
        F = F + chi
    elif chi != 0:
        F = F + chi * _upwind_grad(dp, dm, chi) ** params.sigma
    return np.append(F, 0.0)


def step(
    field: RadialGridField,
    params: ProblemParams,
    config: SchemeConfig,
    boundary_value: Optional[float] = None,
    dt: Optional[float] = None,
) -> RadialGridField:
    """One explicit Euler step; dt defaults to the CFL limit (capped at t_end)."""
    chi = float(params.chi(field.t))
    theta, lip = stability(params, [field.values], field.r, field.h, chi, config.q_bound)
    dt_max = config.cfl_safety / lip if lip > 0 else math.inf
    if dt is None:
        dt = config.dt if config.dt is not None else min(dt_max, config.t_end)
    if dt > dt_max * (1 + 1e-12):
        raise SimulationError(f"CFL violated: dt = {dt!r} exceeds {dt_max!r}")
    u = field.values + dt * rhs(params, field.values, field.r, field.h, chi, theta)
    u[-1] = field.values[-1] if boundary_value is None else boundary_value
    if not np.all(np.isfinite(u)):
        raise SimulationError("non-finite values after step")
    return RadialGridField(field.R, field.h, u, field.t + dt)


@dataclass
class Trajectory:
    r: np.ndarray
    times: np.ndarray
    values: np.ndarray  # shape (len(times), len(r))
    steps: int

    @property
    def centre(self) -> np.ndarray:
        return self.values[:, 0]


def _as_boundary(boundary, u0_edge: float):
    if boundary is None:
        return lambda t: u0_edge
    if callable(boundary):
        return boundary
    return lambda t: float(boundary)


def _march(params, fields, r, h, config, g, record_every, on_step=None, record_dt=None):
    """Advance several fields with a common scheme (shared theta and dt).

    Snapshots are kept every ``record_every`` steps, or, with ``record_dt``,
    at the first step past each multiple of record_dt.
    """
    t = 0.0
    mark = record_dt
    us = [f.copy() for f in fields]
    times, recs = [0.0], [[u.copy() for u in us]]
    cap = config.t_end / MIN_STEPS
    if config.max_dt is not None:
        cap = min(cap, config.max_dt)
    i = 0
    while t < config.t_end * (1 - 1e-14):
        chi = float(params.chi(t))
        theta, lip = stability(params, us, r, h, chi, config.q_bound)
        dt_max = config.cfl_safety / lip if lip > 0 else math.inf
        if config.dt is not None:
            if config.dt > dt_max * (1 + 1e-12):
                raise SimulationError(f"CFL violated at step {i}: dt = {config.dt!r} exceeds {dt_max!r}")
            dt = config.dt
        else:
            dt = min(dt_max, cap)
        dt = min(dt, config.t_end - t)
        edge = g(t + dt)
        new = []
        for u in us:
            v = u + dt * rhs(params, u, r, h, chi, theta)
            v[-1] = edge
            if not np.all(np.isfinite(v)):
                raise SimulationError(f"non-finite values at step {i}")
            new.append(v)
        us = new
        t += dt
        i += 1
        if on_step is not None:
            on_step(i, t, us)
        if record_dt is not None:
            due = t >= mark * (1 - 1e-12)
            while mark <= t * (1 + 1e-12):
                mark += record_dt
        else:
            due = i % record_every == 0
        if due or t >= config.t_end * (1 - 1e-14):
            times.append(t)
            recs.append([u.copy() for u in us])
    return times, recs, i


def simulate(
    params: ProblemParams,
    initial,
    config: SchemeConfig,
    boundary=None,
    R: Optional[float] = None,
    record_every: int = 1,
    record_dt: Optional[float] = None,
) -> Trajectory:
    """Run from ``initial`` (a RadialGridField or a callable of r with ``R``) to t_end."""
    if not isinstance(initial, RadialGridField):
        if R is None:
            raise SimulationError("R is required when the initial data is a function")
        initial = RadialGridField.from_function(R, config.h, initial)
    if abs(initial.h - config.h) > 1e-12 * config.h:
        raise SimulationError("field spacing differs from the scheme spacing")
    r = initial.r
    g = _as_boundary(boundary, float(initial.values[-1]))
    times, recs, n = _march(params, [initial.values], r, config.h, config, g, record_every, record_dt=record_dt)
    return Trajectory(r, np.array(times), np.array([rec[0] for rec in recs]), n)


@dataclass
class PairReport:
    steps: int
    violations: int
    worst_gap: float  # min over steps and nodes of v - u


def simulate_pair(params, u0: np.ndarray, v0: np.ndarray, R: float, config: SchemeConfig, boundary) -> PairReport:
    """Advance u and v with a common scheme and count nodes where u exceeds v."""
    h = config.h
    r = h * np.arange(len(u0))
    g = _as_boundary(boundary, float(u0[-1]))
    worst = [float(np.min(v0 - u0))]
    bad = [0]

    def watch(i, t, us):
        gap = us[1] - us[0]
        scale = 1e-12 * max(1.0, float(np.abs(us[0]).max()))
        bad[0] += int(np.count_nonzero(gap < -scale))
        worst[0] = min(worst[0], float(gap.min()))

    _, _, n = _march(params, [u0, v0], r, h, config, g, record_every=10**9, on_step=watch)
    return PairReport(n, bad[0], worst[0])


# -- comparison against barriers ------------------------------------------------------------


@dataclass
class ComparisonReport:
    precondition_ok: bool
    boundary_violations: int
    interior_violations: int
    worst_gap: float  # max of u - W
    worst_location: tuple  # (r, t)
    tol: float

    @property
    def passed(self) -> bool:
        return self.precondition_ok and self.interior_violations == 0


def barrier_function(barrier: BarrierSpec, offset: float = 0.0) -> Callable:
    """W(r, t) = offset + w(r, t), vectorized."""
    return lambda r, t: offset + barrier.value(r, t)


def check_comparison(traj: Trajectory, barrier: Callable, tol: float, upper: bool = True) -> ComparisonReport:
    """Check u <= W + tol (``upper``) or u >= W - tol at every node and stored time."""
    Rg, Tg = np.meshgrid(traj.r, traj.times)
    W = barrier(Rg, Tg)
    gap = traj.values - W if upper else W - traj.values
    on_boundary = np.zeros_like(gap, dtype=bool)
    on_boundary[0, :] = True
    on_boundary[:, -1] = True
    b_bad = int(np.count_nonzero(gap[on_boundary] > tol))
    i_bad = int(np.count_nonzero(gap[~on_boundary] > tol))
    idx = np.unravel_index(int(np.argmax(gap)), gap.shape)
    return ComparisonReport(
        precondition_ok=b_bad == 0,
        boundary_violations=b_bad,
        interior_violations=i_bad,
        worst_gap=float(gap[idx]),
        worst_location=(float(traj.r[idx[1]]), float(traj.times[idx[0]])),
        tol=tol,
    )


@dataclass
class RefinementReport:
    hs: list
    diffs: list  # max |u_h - u_{h/2}| at t_end on the coarse nodes
    order: float
    C: float


def refinement_study(params, initial: Callable, R: float, h: float, t_end: float, boundary=None, levels: int = 3, cfl_safety: float = 0.5) -> RefinementReport:
    """Self-convergence at t_end over h, h/2, h/4.

    dt follows the CFL rule but is also capped proportionally to h, so the
    time error is refined together with the space error.
    """
    finals = []
    hs = [h / 2**j for j in range(levels)]
    for hj in hs:
        cfg = SchemeConfig(hj, t_end, cfl_safety=cfl_safety, max_dt=t_end / MIN_STEPS * hj / h)
        traj = simulate(params, initial, cfg, boundary, R=R, record_every=10**9)
        finals.append(traj.values[-1])
    diffs = []
    for j in range(levels - 1):
        fine = finals[j + 1][:: 2]
        diffs.append(float(np.max(np.abs(finals[j] - fine))))
    order = math.log2(diffs[0] / diffs[1]) if len(diffs) > 1 and diffs[1] > 0 else math.inf
    C = 2 * diffs[0] / hs[0]
    return RefinementReport(hs, diffs, order, C)


# -- growth experiments ------------------------------------------------------------


@dataclass
class PLRow:
    R: float
    sup_centre: float
    bound: float
    margin: float
    steps: int
    trajectory: Optional[Trajectory] = field(default=None, repr=False)


@dataclass
class PLReport:
    growth_beta: float
    rows: list
    margins_decreasing: bool
    note: str = (
        "modeling choice: boundary data growth stands in for solution growth; "
        "the trend, not a threshold, is the reported quantity"
    )


def pl_bound(params: ProblemParams, nu: float) -> float:
    """Interior bound for the centre: nu + alpha T when sigma = 0, nu otherwise."""
    return nu + params.alpha * params.T if params.sigma == 0 else nu


def _pl_run(params, growth_beta, R, h, nu, cfl_safety, record_dt=None):
    envelope = R**growth_beta / math.log(1 + R)
    h0 = lambda r: nu * np.cos(r) ** 2
    edge0 = float(h0(np.array([R]))[0])
    T = params.T
    g = lambda t: edge0 + (envelope - edge0) * min(t / T, 1.0)
    sup_c = [nu]

    cfg = SchemeConfig(h, T, cfl_safety=cfl_safety)
    field0 = RadialGridField.from_function(R, h, h0)
    keep = record_dt is not None

    def watch(i, t, us):
        sup_c[0] = max(sup_c[0], float(us[0][0]))

    times, recs, n = _march(params, [field0.values], field0.r, h, cfg, g, 10**12, on_step=watch,
                            record_dt=record_dt if keep else T)
    sup_c = max(sup_c[0], float(field0.values[0]))
    bound = pl_bound(params, nu)
    traj = Trajectory(field0.r, np.array(times), np.array([rec[0] for rec in recs]), n) if keep else None
    return PLRow(R, sup_c, bound, sup_c - bound, n, traj)


def pl_experiment(params, growth_beta: float, R_list, h: float = 0.25, nu: float = 1.0, cfl_safety: float = 0.5, workers: int = 4, record_dt: Optional[float] = None) -> PLReport:
    """Centre value against the interior bound for growing balls.

    Initial data nu cos^2(r) <= nu; the lateral value ramps linearly in time
    up to R^beta / log(1 + R). Runs for different R are independent and use
    a thread pool.
    """
    with ThreadPoolExecutor(max_workers=workers) as pool:
        rows = list(pool.map(lambda R: _pl_run(params, growth_beta, float(R), h, nu, cfl_safety, record_dt), R_list))
    margins = [row.margin for row in rows]
    dec = all(b <= a + 1e-12 for a, b in zip(margins, margins[1:]))
    return PLReport(growth_beta, rows, dec)


def exp_crossover_radius(c: float, eps: float, b: float = 1.0) -> float:
    """Smallest R0 with b exp(c R^2) > exp(eps R^2) for all R > R0 (inf when eps >= c)."""
    if eps >= c:
        return math.inf
    if b >= 1:
        return 0.0
    return math.sqrt(math.log(1.0 / b) / (c - eps))


@dataclass
class DominationRow:
    eps: float
    b: float
    check: ComparisonReport
    centre_excess: float  # sup_t u(0,t) - (nu + a t)


def domination_sweep(params, barrier_for_b: Callable, eps_list, khat: float, R: float, h: float, nu: float = 1.0, tol: Optional[float] = None, cfl_safety: float = 0.5):
    """Barrier W = nu + w_b with b = khat*eps against a run whose data sit below W.

    Initial data nu cos^2(r); lateral data rise from the initial edge value by
    eps R^beta t/T where beta is the barrier profile's growth, so W dominates
    on the parabolic boundary. Returns one row per eps.
    """
    rows = []
    T = params.T
    h0 = lambda r: nu * np.cos(r) ** 2
    edge0 = float(h0(np.array([R]))[0])
    for eps in eps_list:
        w = barrier_for_b(khat * eps)
        rise = eps * float(w.profile.value(R))
        g = lambda t, rise=rise: edge0 + rise * t / T
        traj = simulate(params, h0, SchemeConfig(h, T, cfl_safety=cfl_safety), g, R=R)
        W = barrier_function(w, nu)
        tol_eff = tol if tol is not None else 1e-9
        rep = check_comparison(traj, W, tol_eff)
        excess = float(np.max(traj.centre - (nu + w.a * traj.times)))
        rows.append(DominationRow(eps, khat * eps, rep, excess))
    return rows
