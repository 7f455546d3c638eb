"""Bracketed monotone root finding with diagnostics."""
from __future__ import annotations

import math


class BracketError(ValueError):
    """Raised when a root is not bracketed."""


def bisect(f, lo: float, hi: float, tol: float = 1e-12, max_iter: int = 400) -> float:
    """Root of f on [lo, hi] by bisection; f(lo) and f(hi) must differ in sign."""
    flo, fhi = f(lo), f(hi)
    if flo == 0:
        return lo
    if fhi == 0:
        return hi
    if not (math.isfinite(flo) and math.isfinite(fhi)) or (flo > 0) == (fhi > 0):
        raise BracketError(f"no sign change on [{lo!r}, {hi!r}]: f(lo)={flo!r}, f(hi)={fhi!r}")
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if fm == 0:
            return mid
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
        if hi - lo <= tol * max(1.0, abs(mid)):
            break
    return 0.5 * (lo + hi)


def increasing_root(f, start: float = 1.0, tol: float = 1e-12, grow: float = 2.0, max_doublings: int = 200) -> float:
    """Root on (0, inf) of an increasing f with f(0+) < 0, expanding the bracket upward."""
    hi = start
    for _ in range(max_doublings):
        if f(hi) > 0:
            break
        hi *= grow
    else:
        raise BracketError(f"f stayed nonpositive up to {hi!r}")
    lo = hi
    while f(lo) > 0:
        lo /= grow
        if lo < 1e-300:
            raise BracketError("f positive arbitrarily close to 0")
    return bisect(f, lo, hi, tol=tol)
