"""Scenario configuration: a TOML file with operator, problem, run, sim and transform blocks.

Every field error is raised as ConfigError with the dotted field name, so
the CLI can report exactly what is wrong. See ``configs/default.toml``.
"""
from __future__ import annotations

import math
import os
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from . import operators as ops
from .barriers import SPECIAL_IDS
from .params import ChiProfile, ParamsError, ProblemParams, ZFunction

OUTPUT_ENV = "PLB_OUTPUT_DIR"
# Fixed offsets that split the global seed into per-module substreams.
SEED_OFFSETS = {"lambda": 0, "certify": 1000, "simulate": 2000, "transform": 3000}
LINEAR_CASES = ("super", "sub")
CASE_NAMES = LINEAR_CASES + tuple(SPECIAL_IDS.values())


class ConfigError(ValueError):
    """Invalid configuration; the message starts with the offending field."""


def _num(block: dict, key: str, where: str, default=None, required=False):
    if key not in block:
        if required:
            raise ConfigError(f"{where}.{key}: missing")
        return default
    val = block[key]
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise ConfigError(f"{where}.{key}: expected a number, got {val!r}")
    if not math.isfinite(val):
        raise ConfigError(f"{where}.{key}: must be finite")
    return float(val)


def _nums(block: dict, key: str, where: str, default=None):
    if key not in block:
        return default
    val = block[key]
    if not isinstance(val, list):
        val = [val]
    return [_num({key: v}, key, where) for v in val]


@dataclass(frozen=True)
class OperatorBlock:
    kind: str = ops.GRAD_TRACE
    n: int = 2
    p: float = 0.0
    m: Optional[int] = None

    def build(self) -> ops.OperatorSpec:
        try:
            if self.kind == ops.GRAD_TRACE:
                return ops.grad_trace(self.n, self.p)
            if self.kind == ops.TRUNCATED_EIG:
                if self.m is None:
                    raise ConfigError("operator.m: required for truncated_eigen_sum")
                return ops.truncated_eigen_sum(self.n, self.m, self.p)
            if self.kind == "median_eigenvalue":
                return ops.median_eigenvalue(self.n)
        except ops.OperatorError as exc:
            raise ConfigError(f"operator: {exc}") from exc
        raise ConfigError(f"operator.kind: unknown kind {self.kind!r}")


@dataclass(frozen=True)
class RunBlock:
    cases: tuple = LINEAR_CASES
    sigma_sweep: tuple = ()
    sampler: str = "low_discrepancy"
    n_samples: int = 100_000
    slack: Optional[float] = None
    R_probe: Optional[float] = None
    b: Optional[float] = None
    R: float = 10.0
    mu: float = 1.0
    E: float = 0.1
    dump_samples: int = 200


@dataclass(frozen=True)
class SimBlock:
    case: str = "pl"
    R: tuple = (5.0, 10.0, 20.0, 40.0)
    h: float = 0.25
    dt: Optional[float] = None
    growth_beta: Optional[float] = None
    nu: float = 1.0
    eps: tuple = (1e-3, 1e-4)
    khat: float = 2.0
    record_rows: int = 50


@dataclass(frozen=True)
class TransformBlock:
    f: str = "power:0.5,0"
    k: float = 3.0
    v_max: float = 10.0
    points: int = 51


@dataclass(frozen=True)
class ScenarioConfig:
    operator: OperatorBlock = OperatorBlock()
    problem: dict = field(default_factory=dict)
    run: RunBlock = RunBlock()
    sim: Optional[SimBlock] = None
    transform: Optional[TransformBlock] = None
    seed: int = 0
    workers: int = 4
    output_dir: str = "plb_out"

    def seed_for(self, module: str, index: int = 0) -> int:
        return self.seed + SEED_OFFSETS[module] + index

    def params(self, sigma: Optional[float] = None) -> ProblemParams:
        """ProblemParams from the problem block, optionally with sigma replaced."""
        return build_params(self.operator.build(), self.problem, sigma)

    def sigmas(self) -> list:
        if self.run.sigma_sweep:
            return list(self.run.sigma_sweep)
        return [_num(self.problem, "sigma", "problem", 0.0)]


def _z_function(block: dict) -> ZFunction:
    where = "problem.Z"
    kind = block.get("kind", "zero")
    try:
        if kind == "zero":
            return ZFunction.zero()
        if kind == "zero_above":
            return ZFunction.zero_above(_num(block, "s0", where, required=True), _num(block, "scale", where, 1.0))
        if kind == "power_decay":
            return ZFunction.power_decay(_num(block, "scale", where, 1.0), _num(block, "power", where, 1.0))
        if kind == "table":
            s = _nums(block, "s", where)
            z = _nums(block, "z", where)
            if not s or not z:
                raise ConfigError(f"{where}.s/z: table needs knots s and values z")
            if "domain_min" in block:
                dmin = _num(block, "domain_min", where)
                if dmin > s[0]:
                    raise ConfigError(f"{where}.domain_min: {dmin!r} exceeds the first knot {s[0]!r}")
            return ZFunction.table(s, z)
    except ParamsError as exc:
        raise ConfigError(f"{where}: {exc}") from exc
    raise ConfigError(f"{where}.kind: unknown kind {kind!r}")


def _chi_profile(block: dict, alpha: float) -> ChiProfile:
    where = "problem.chi_profile"
    kind = block.get("kind", "const")
    try:
        if kind == "const":
            return ChiProfile("const", _num(block, "value", where, alpha))
        if kind == "sin":
            return ChiProfile("sin", _num(block, "value", where, alpha), _num(block, "omega", where, 1.0))
        if kind == "table":
            t = _nums(block, "t", where) or []
            c = _nums(block, "chi", where) or []
            return ChiProfile("table", table_t=tuple(t), table_chi=tuple(c))
    except ParamsError as exc:
        raise ConfigError(f"{where}: {exc}") from exc
    raise ConfigError(f"{where}.kind: unknown kind {kind!r}")


def build_params(op: ops.OperatorSpec, problem: dict, sigma: Optional[float] = None) -> ProblemParams:
    where = "problem"
    alpha = _num(problem, "alpha", where, 0.0)
    kw = dict(
        op=op,
        sigma=_num(problem, "sigma", where, 0.0) if sigma is None else float(sigma),
        T=_num(problem, "T", where, 1.0),
        alpha=alpha,
        alpha_hat_neg=_num(problem, "alpha_hat_neg", where),
        alpha_hat_pos=_num(problem, "alpha_hat_pos", where),
        M=_num(problem, "M", where),
        N=_num(problem, "N", where),
    )
    kw["Z"] = _z_function(problem.get("Z", {}))
    if "chi_profile" in problem:
        kw["chi"] = _chi_profile(problem["chi_profile"], alpha)
    try:
        return ProblemParams(**kw)
    except ParamsError as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def _check_keys(block: dict, allowed, where: str):
    extra = sorted(set(block) - set(allowed))
    if extra:
        raise ConfigError(f"{where}.{extra[0]}: unknown field")


def parse_config(data: dict) -> ScenarioConfig:
    """Validate a parsed TOML document into a ScenarioConfig."""
    _check_keys(data, ("operator", "problem", "run", "sim", "transform", "seed", "workers", "output_dir"), "config")
    ob = data.get("operator", {})
    _check_keys(ob, ("kind", "n", "p", "m"), "operator")
    m = ob.get("m")
    operator = OperatorBlock(
        kind=str(ob.get("kind", ops.GRAD_TRACE)),
        n=int(_num(ob, "n", "operator", 2)),
        p=_num(ob, "p", "operator", 0.0),
        m=None if m is None else int(_num(ob, "m", "operator")),
    )
    operator.build()
    problem = dict(data.get("problem", {}))
    _check_keys(problem, ("sigma", "T", "alpha", "alpha_hat_neg", "alpha_hat_pos", "M", "N", "Z", "chi_profile"), "problem")
    _z_function(problem.get("Z", {}))

    rb = data.get("run", {})
    _check_keys(rb, tuple(RunBlock.__dataclass_fields__), "run")
    cases = tuple(rb.get("cases", LINEAR_CASES))
    for c in cases:
        if c not in CASE_NAMES:
            raise ConfigError(f"run.cases: unknown case {c!r} (known: {', '.join(CASE_NAMES)})")
    sampler = rb.get("sampler", "low_discrepancy")
    if sampler not in ("grid", "low_discrepancy"):
        raise ConfigError(f"run.sampler: unknown sampler {sampler!r}")
    n_samples = int(_num(rb, "n_samples", "run", 100_000))
    if n_samples < 1:
        raise ConfigError("run.n_samples: must be >= 1")
    run = RunBlock(
        cases=cases,
        sigma_sweep=tuple(_nums(rb, "sigma_sweep", "run", [])),
        sampler=sampler,
        n_samples=n_samples,
        slack=_num(rb, "slack", "run"),
        R_probe=_num(rb, "R_probe", "run"),
        b=_num(rb, "b", "run"),
        R=_num(rb, "R", "run", 10.0),
        mu=_num(rb, "mu", "run", 1.0),
        E=_num(rb, "E", "run", 0.1),
        dump_samples=int(_num(rb, "dump_samples", "run", 200)),
    )

    sim = None
    if "sim" in data:
        sb = data["sim"]
        _check_keys(sb, tuple(SimBlock.__dataclass_fields__), "sim")
        case = sb.get("case", "pl")
        if case not in ("pl", "domination"):
            raise ConfigError(f"sim.case: unknown experiment {case!r}")
        sim = SimBlock(
            case=case,
            R=tuple(_nums(sb, "R", "sim", list(SimBlock.R))),
            h=_num(sb, "h", "sim", 0.25),
            dt=_num(sb, "dt", "sim"),
            growth_beta=_num(sb, "growth_beta", "sim"),
            nu=_num(sb, "nu", "sim", 1.0),
            eps=tuple(_nums(sb, "eps", "sim", list(SimBlock.eps))),
            khat=_num(sb, "khat", "sim", 2.0),
            record_rows=int(_num(sb, "record_rows", "sim", 50)),
        )
    transform = None
    if "transform" in data:
        tb = data["transform"]
        _check_keys(tb, tuple(TransformBlock.__dataclass_fields__), "transform")
        transform = TransformBlock(
            f=str(tb.get("f", "power:0.5,0")),
            k=_num(tb, "k", "transform", 3.0),
            v_max=_num(tb, "v_max", "transform", 10.0),
            points=int(_num(tb, "points", "transform", 51)),
        )
    return ScenarioConfig(
        operator=operator,
        problem=problem,
        run=run,
        sim=sim,
        transform=transform,
        seed=int(_num(data, "seed", "config", 0)),
        workers=int(_num(data, "workers", "config", 4)),
        output_dir=str(data.get("output_dir", "plb_out")),
    )


def load_config(path) -> ScenarioConfig:
    path = Path(path)
    try:
        with path.open("rb") as fh:
            data = tomllib.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config: file {str(path)!r} not found") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config: {exc}") from exc
    return parse_config(data)


def output_dir(config: ScenarioConfig, override: Optional[str] = None) -> Path:
    """Explicit override, then the environment variable, then the config value."""
    chosen = override or os.environ.get(OUTPUT_ENV) or config.output_dir
    return Path(chosen)


def with_output(config: ScenarioConfig, path: str) -> ScenarioConfig:
    return replace(config, output_dir=path)
