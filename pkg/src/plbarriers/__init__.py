"""Barriers, residual certificates and comparison experiments for degenerate parabolic operators."""
from .barriers import (
    CASE_IDS,
    BarrierBuildError,
    BarrierSpec,
    build_special,
    build_subsolution,
    build_supersolution,
    classify,
)
from .certify import certify, residual_full, residual_radial
from .dnl import PowerFamily, build_phi, classify_F
from .operators import OperatorSpec, eval_H, grad_trace, truncated_eigen_sum
from .params import ChiProfile, ProblemParams, ZFunction

__version__ = "0.1.0"

__all__ = [
    "CASE_IDS",
    "BarrierBuildError",
    "BarrierSpec",
    "ChiProfile",
    "OperatorSpec",
    "PowerFamily",
    "ProblemParams",
    "ZFunction",
    "build_phi",
    "build_special",
    "build_subsolution",
    "build_supersolution",
    "certify",
    "classify",
    "classify_F",
    "eval_H",
    "grad_trace",
    "residual_full",
    "residual_radial",
    "truncated_eigen_sum",
]
