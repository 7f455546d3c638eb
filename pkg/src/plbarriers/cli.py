"""Command line entry point: certify, simulate, transform, lambda, report.

Exit status: 0 on success, 1 when a requested certification fails, 2 on
configuration or build errors. CSV floats are written with repr, and rows
come out in a fixed order, so repeated runs give byte-identical files.
"""
from __future__ import annotations

import argparse
import ast
import csv
import logging
import operator as _op
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional

import numpy as np

from . import barriers as bf
from . import dnl
from . import lab
from . import operators as ops
from .certify import CertifyError, certify
from .config import (
    ConfigError,
    LINEAR_CASES,
    ScenarioConfig,
    SimBlock,
    TransformBlock,
    load_config,
    output_dir,
    parse_config,
)
from .params import ParamsError
from .profiles import ProfileDomainError

log = logging.getLogger("plbarriers")

EXIT_OK, EXIT_FAIL, EXIT_ERROR = 0, 1, 2
SPECIAL_KEYS = {v: k for k, v in bf.SPECIAL_IDS.items()}

BARRIER_COLUMNS = ("case_id", "a", "b", "c", "p", "R", "r_star", "a_limit")
SUMMARY_COLUMNS = ("case_id", "variant", "sigma", "direction", "profile", "a", "b", "a_limit", "worst_residual", "pass")
LIMIT_COLUMNS = ("case_id", "variant", "sigma", "a_extrapolated", "a_limit_table", "abs_diff")
PL_COLUMNS = ("R", "sup_center", "bound", "margin")

BUILD_ERRORS = (bf.BarrierBuildError, CertifyError, ParamsError, ProfileDomainError, ops.OperatorError, ValueError)


def fmt(x) -> str:
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return str(x)


def write_csv(path: Path, columns, rows):
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            values = [row[c] for c in columns] if isinstance(row, dict) else row
            w.writerow([fmt(v) for v in values])


def read_csv(path: Path) -> list:
    with path.open(newline="") as fh:
        return list(csv.DictReader(fh))


# -- certify ----------------------------------------------------------------------------


@dataclass
class CaseOutcome:
    label: str
    sigma: float
    summary: Optional[dict] = None
    barrier_row: Optional[dict] = None
    limit_row: Optional[dict] = None
    samples: tuple = ()
    error: Optional[str] = None

    @property
    def passed(self) -> bool:
        return self.error is None and self.summary is not None and self.summary["pass"]


def _run_case(config: ScenarioConfig, case: str, sigma: float, seed: int) -> CaseOutcome:
    label = f"{case} (sigma={sigma!r})"
    run = config.run
    try:
        params = config.params(sigma)
        if case in LINEAR_CASES:
            direction = bf.SUPER if case == "super" else bf.SUB
            b = run.b if run.b is not None else bf.default_b(params, direction)
            build = bf.build_supersolution if case == "super" else bf.build_subsolution
            barrier = build(params, b)
        else:
            barrier = bf.build_special(params, SPECIAL_KEYS[case], R=run.R, mu=run.mu, E=run.E)
        rep = certify(params, barrier, sampler=run.sampler, n_samples=run.n_samples, slack=run.slack,
                      R_probe=run.R_probe, seed=seed, keep_samples=run.dump_samples > 0)
    except BUILD_ERRORS as exc:
        return CaseOutcome(label, sigma, error=f"{label}: {exc}")
    summary = {
        "case_id": barrier.case_id,
        "variant": barrier.variant,
        "sigma": float(sigma),
        "direction": barrier.direction,
        "profile": barrier.profile.describe(),
        "a": barrier.a,
        "b": barrier.b,
        "a_limit": barrier.a_limit,
        "worst_residual": rep.worst_residual,
        "pass": rep.passed,
    }
    limit = None
    if case in LINEAR_CASES:
        est = bf.extrapolate_a_limit(params, barrier.direction)
        table = bf.a_limit_table(params, barrier.direction)
        limit = {"case_id": barrier.case_id, "variant": barrier.variant, "sigma": float(sigma),
                 "a_extrapolated": est, "a_limit_table": table, "abs_diff": abs(est - table)}
    samples = ()
    if rep.samples:
        idx = np.linspace(0, rep.n_samples - 1, min(run.dump_samples, rep.n_samples)).astype(int)
        samples = tuple((barrier.case_id, float(rep.samples["r"][i]), float(rep.samples["t"][i]),
                         float(rep.samples["residual"][i])) for i in idx)
    if not rep.passed:
        log.warning("%s: %d violations, worst residual %r", label, rep.violations, rep.worst_residual)
    return CaseOutcome(label, sigma, summary, barrier.csv_row(), limit, samples)


def _markdown_table(columns, rows) -> str:
    lines = ["| " + " | ".join(columns) + " |", "|" + "---|" * len(columns)]
    for row in rows:
        lines.append("| " + " | ".join(fmt(row[c]) for c in columns) + " |")
    return "\n".join(lines)


def run_certify(config: ScenarioConfig, out: Path) -> tuple:
    """Certify every (sigma, case) pair; returns (exit status, outcomes)."""
    jobs = [(case, s) for s in config.sigmas() for case in config.run.cases]
    seeds = [config.seed_for("certify", i) for i in range(len(jobs))]
    with ThreadPoolExecutor(max_workers=max(1, config.workers)) as pool:
        outcomes = list(pool.map(lambda j: _run_case(config, j[0][0], j[0][1], j[1]), zip(jobs, seeds)))
    # single collector: all writes happen here, in job order
    done = [o for o in outcomes if o.error is None]
    write_csv(out / "barriers.csv", BARRIER_COLUMNS, [o.barrier_row for o in done])
    write_csv(out / "summary.csv", SUMMARY_COLUMNS, [o.summary for o in done])
    write_csv(out / "a_limits.csv", LIMIT_COLUMNS, [o.limit_row for o in done if o.limit_row])
    write_csv(out / "certificates.csv", ("case_id", "r", "t", "residual"), [s for o in done for s in o.samples])
    md = ["# Certification summary", "", _markdown_table(("case_id", "profile", "a", "b", "a_limit", "worst_residual", "pass"), [o.summary for o in done])]
    errors = [o.error for o in outcomes if o.error]
    if errors:
        md += ["", "## Errors", ""] + [f"- {e}" for e in errors]
    (out / "summary.md").write_text("\n".join(md) + "\n")
    for e in errors:
        print(f"error: {e}", file=sys.stderr)
    for o in done:
        print(f"{o.summary['case_id']:8s} {o.summary['variant']:7s} sigma={o.sigma!r:6s} "
              f"worst={o.summary['worst_residual']!r} {'PASS' if o.passed else 'FAIL'}")
    if errors:
        return EXIT_ERROR, outcomes
    return (EXIT_OK if all(o.passed for o in done) else EXIT_FAIL), outcomes


# -- simulate -----------------------------------------------------------------------


def run_simulate(config: ScenarioConfig, out: Path, trajectory_name: str = "simulate.csv") -> int:
    sim = config.sim or SimBlock()
    params = config.params()
    if sim.case == "pl":
        beta = sim.growth_beta
        if beta is None:
            beta = params.gamma_star if params.k > 1 else 2.0
        record_dt = params.T / max(1, sim.record_rows)
        rep = lab.pl_experiment(params, beta, sim.R, h=sim.h, nu=sim.nu, workers=config.workers, record_dt=record_dt)
        rows = [{"R": r.R, "sup_center": r.sup_centre, "bound": r.bound, "margin": r.margin} for r in rep.rows]
        write_csv(out / "pl_summary.csv", PL_COLUMNS, rows)
        trajs = [(r.R, r.trajectory) for r in rep.rows]
        for row in rows:
            print(f"R={row['R']!r} sup_center={row['sup_center']!r} bound={row['bound']!r} margin={row['margin']!r}")
        print(f"growth beta={beta!r}; margins decreasing: {rep.margins_decreasing}")
    else:
        R = float(sim.R[-1])
        ref = lab.refinement_study(params, lambda r: sim.nu * np.cos(r) ** 2, R, sim.h, params.T)
        tol = ref.C * sim.h
        rows = lab.domination_sweep(params, lambda b: bf.build_supersolution(params, b), sim.eps, sim.khat, R, sim.h,
                                    nu=sim.nu, tol=tol)
        drows = [{"eps": r.eps, "b": r.b, "interior_violations": r.check.interior_violations,
                  "worst_gap": r.check.worst_gap, "centre_excess": r.centre_excess, "tol": tol} for r in rows]
        write_csv(out / "domination.csv", ("eps", "b", "interior_violations", "worst_gap", "centre_excess", "tol"), drows)
        traj = lab.simulate(params, lambda r: sim.nu * np.cos(r) ** 2, lab.SchemeConfig(sim.h, params.T, dt=sim.dt), R=R,
                            record_every=1)
        keep = np.unique(np.linspace(0, len(traj.times) - 1, sim.record_rows + 1).astype(int))
        trajs = [(R, lab.Trajectory(traj.r, traj.times[keep], traj.values[keep], traj.steps))]
        for r in drows:
            print(f"eps={r['eps']!r} b={r['b']!r} violations={r['interior_violations']} worst_gap={r['worst_gap']!r}")
    path = out / trajectory_name
    for R, traj in trajs:
        target = path if len(trajs) == 1 else path.with_name(f"{path.stem}_R{fmt(float(R))}{path.suffix}")
        rows = ((float(t), float(r), float(u)) for t, us in zip(traj.times, traj.values) for r, u in zip(traj.r, us))
        write_csv(target, ("t", "r", "u"), rows)
    return EXIT_OK


# -- transform ------------------------------------------------------------------------

_BINOPS = {ast.Add: _op.add, ast.Sub: _op.sub, ast.Mult: _op.mul, ast.Div: _op.truediv, ast.Pow: _op.pow}
_FUNCS = {"exp": np.exp, "log": np.log, "sqrt": np.sqrt, "sin": np.sin, "cos": np.cos, "log1p": np.log1p}


def parse_expression(text: str):
    """f(s) from an arithmetic expression in s (numbers, + - * / **, exp/log/sqrt/sin/cos)."""
    try:
        tree = ast.parse(text, mode="eval")
    except SyntaxError as exc:
        raise ConfigError(f"transform.f: cannot parse {text!r}") from exc

    def ev(node, s):
        if isinstance(node, ast.Expression):
            return ev(node.body, s)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return float(node.value)
        if isinstance(node, ast.Name) and node.id == "s":
            return s
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            return _BINOPS[type(node.op)](ev(node.left, s), ev(node.right, s))
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            v = ev(node.operand, s)
            return -v if isinstance(node.op, ast.USub) else v
        if isinstance(node, ast.Call) and isinstance(node.func, ast.Name) and node.func.id in _FUNCS and len(node.args) == 1:
            return _FUNCS[node.func.id](ev(node.args[0], s))
        raise ConfigError(f"transform.f: unsupported element {ast.dump(node)[:40]!r}")

    ev(tree, np.float64(0.5))  # validate once
    return lambda s: ev(tree, np.asarray(s, dtype=float))


def parse_f(spec: str, k: float):
    """'power:alpha,a' gives the closed-form family; anything else is an expression."""
    if spec.startswith("power:"):
        try:
            alpha, a = (float(x) for x in spec[len("power:"):].split(","))
        except ValueError as exc:
            raise ConfigError(f"transform.f: expected power:alpha,a, got {spec!r}") from exc
        try:
            return dnl.PowerFamily(alpha, a, k)
        except dnl.TransformError as exc:
            raise ConfigError(f"transform.f: {exc}") from exc
    return parse_expression(spec)


def run_transform(block: TransformBlock, out: Path, classify_only: bool = False, name: str = "transform.csv") -> int:
    f = parse_f(block.f, block.k)
    if block.k == 1:
        spec = dnl.build_phi(f, 1.0)
        print("classification: identity (k = 1)")
    else:
        cls = dnl.classify_F(f, block.k)
        print(f"classification: {cls.label} (ratio {cls.ratio!r}, tail {cls.tail_estimate!r})")
        if classify_only:
            return EXIT_OK
        if isinstance(f, dnl.PowerFamily):
            spec = dnl.power_transform(f)
        else:
            spec = dnl.build_phi(f, block.k, classification=cls.label)
        print(f"minimum-principle route: {dnl.minimum_principle_route(spec)}")
    lo = 0.0 if spec.classification == dnl.CONVERGENT else -block.v_max
    vs = np.linspace(lo, block.v_max, block.points)
    rows = [(float(v), spec.phi(v), spec.Z(v)) for v in vs]
    write_csv(out / name, ("v", "u", "Z"), rows)
    return EXIT_OK


# -- lambda -------------------------------------------------------------------------------


def run_lambda(op: ops.OperatorSpec, out: Path, lam_max: float = 1e3, steps: int = 201, seed: int = 0) -> int:
    rep = ops.estimate_lambda_sup_inf(op, lambda_range=(-lam_max, lam_max), steps=steps, seed=seed)
    rows = [(float(l), float(lo), float(hi)) for l, lo, hi in zip(rep.lambda_grid, rep.lambda_min_values, rep.lambda_max_values)]
    write_csv(out / "lambda.csv", ("lambda", "lambda_min", "lambda_max"), rows)
    print(f"operator {op.name}: Lambda^sup = {rep.lambda_sup!r} (slope {rep.upper_slope!r}), "
          f"Lambda^inf = {rep.lambda_inf!r} (slope {rep.lower_slope!r}), monotone: {rep.monotone}")
    return EXIT_OK


# -- report -------------------------------------------------------------------------------


def run_report(out: Path) -> int:
    """Aggregate whatever artifacts exist in ``out`` into report.md."""
    out.mkdir(parents=True, exist_ok=True)
    sections, missing = [], []
    artifacts = ("summary.csv", "a_limits.csv", "pl_summary.csv")
    for name in artifacts:
        if not (out / name).exists():
            missing.append(name)
    present = [n for n in artifacts if n not in missing]
    if "summary.csv" in present:
        rows = read_csv(out / "summary.csv")
        n_pass = sum(r["pass"] == "true" for r in rows)
        sections.append(f"## Certificates\n\n{n_pass} of {len(rows)} cases pass.\n\n"
                        + _markdown_table(SUMMARY_COLUMNS, rows))
    if "a_limits.csv" in present:
        rows = read_csv(out / "a_limits.csv")
        for r in rows:
            r["within_1e-6"] = fmt(float(r["abs_diff"]) <= 1e-6)
        sections.append("## Limits of a as b -> 0\n\n" + _markdown_table(LIMIT_COLUMNS + ("within_1e-6",), rows))
    if "pl_summary.csv" in present:
        rows = read_csv(out / "pl_summary.csv")
        margins = [float(r["margin"]) for r in rows]
        dec = all(b <= a + 1e-12 for a, b in zip(margins, margins[1:]))
        sections.append("## Growth experiment\n\n" + _markdown_table(PL_COLUMNS, rows)
                        + f"\n\nMargin nonincreasing in R: {fmt(dec)}")
    text = ["# Report"]
    if missing and present:
        text.append("Missing artifacts: " + ", ".join(missing))
    text += sections if sections else ["No artifacts found (zero sections)."]
    (out / "report.md").write_text("\n\n".join(text) + "\n")
    print(f"report: {len(sections)} sections written to {out / 'report.md'}")
    return EXIT_OK


# -- argument parsing -------------------------------------------------------------------------


def _load(args) -> ScenarioConfig:
    if getattr(args, "config", None):
        return load_config(args.config)
    return parse_config({})


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="plbarriers", description="Barrier construction, certification and comparison experiments.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("certify", help="build and certify barriers for the configured cases")
    c.add_argument("config", nargs="?", help="scenario TOML file")
    c.add_argument("--out-dir")
    c.add_argument("--n-samples", type=int)
    c.add_argument("--seed", type=int)

    s = sub.add_parser("simulate", help="run a comparison-lab experiment")
    s.add_argument("--config")
    s.add_argument("--case", choices=("pl", "domination"))
    s.add_argument("--R", type=float, nargs="+")
    s.add_argument("--h", type=float)
    s.add_argument("--dt", type=float)
    s.add_argument("--T", type=float)
    s.add_argument("--sigma", type=float)
    s.add_argument("--growth-beta", type=float)
    s.add_argument("--out", default="simulate.csv")
    s.add_argument("--out-dir")

    t = sub.add_parser("transform", help="change of variables for f(u) u_t equations")
    t.add_argument("--config")
    t.add_argument("--f")
    t.add_argument("--k", type=float)
    t.add_argument("--v-max", type=float)
    t.add_argument("--points", type=int)
    t.add_argument("--classify-only", action="store_true")
    t.add_argument("--out", default="transform.csv")
    t.add_argument("--out-dir")

    lam = sub.add_parser("lambda", help="spectral sweep of Lambda_min / Lambda_max")
    lam.add_argument("--config")
    lam.add_argument("--kind")
    lam.add_argument("--n", type=int)
    lam.add_argument("--p", type=float)
    lam.add_argument("--m", type=int)
    lam.add_argument("--lambda-max", type=float, default=1e3)
    lam.add_argument("--steps", type=int, default=201)
    lam.add_argument("--out-dir")

    r = sub.add_parser("report", help="aggregate artifacts in the output directory")
    r.add_argument("--config")
    r.add_argument("--out-dir")
    return p


def _dispatch(args) -> int:
    config = _load(args)
    if args.command == "certify":
        if args.n_samples is not None:
            config = replace(config, run=replace(config.run, n_samples=args.n_samples))
        if args.seed is not None:
            config = replace(config, seed=args.seed)
        status, _ = run_certify(config, output_dir(config, args.out_dir))
        return status
    if args.command == "simulate":
        sim = config.sim or SimBlock()
        upd = {k: v for k, v in (("case", args.case), ("h", args.h), ("dt", args.dt), ("growth_beta", args.growth_beta)) if v is not None}
        if args.R:
            upd["R"] = tuple(args.R)
        problem = dict(config.problem)
        if args.sigma is not None:
            problem["sigma"] = args.sigma
        if args.T is not None:
            problem["T"] = args.T
        config = replace(config, sim=replace(sim, **upd), problem=problem)
        return run_simulate(config, output_dir(config, args.out_dir), args.out)
    if args.command == "transform":
        block = config.transform or TransformBlock()
        upd = {k: v for k, v in (("f", args.f), ("k", args.k), ("v_max", args.v_max), ("points", args.points)) if v is not None}
        return run_transform(replace(block, **upd), output_dir(config, args.out_dir), args.classify_only, args.out)
    if args.command == "lambda":
        ob = config.operator
        upd = {k: v for k, v in (("kind", args.kind), ("n", args.n), ("p", args.p), ("m", args.m)) if v is not None}
        op = replace(ob, **upd).build()
        return run_lambda(op, output_dir(config, args.out_dir), args.lambda_max, args.steps, config.seed_for("lambda"))
    return run_report(output_dir(config, args.out_dir))


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return _dispatch(args)
    except (ConfigError, dnl.TransformError, lab.SimulationError) + BUILD_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
