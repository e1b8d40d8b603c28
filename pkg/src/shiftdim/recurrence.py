"""Return times ``tau_s(x) = min{k >= 1 : r(T^k x, x) < s}`` and the
finite-scale recurrence-rate quotients ``log tau_s / (-log s)``."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import pairs as _pairs
from .shift_space import SQUARES, ScaleGrid, SeqWindow, distance, window_cutoff

NOT_FOUND = None


@dataclass(frozen=True)
class ReturnRecord:
    radius: float
    tau: int | None
    horizon: int
    flag: str = "ok"

    def __post_init__(self):
        if self.tau is not None and not 1 <= self.tau <= self.horizon:
            raise ValueError("tau must lie in [1, horizon]")

    @property
    def found(self) -> bool:
        return self.tau is not None


@dataclass(frozen=True)
class RecurrenceRow:
    scale: float
    tau: int | None
    quotient: float
    flag: str

    def row(self) -> dict:
        return {"scale": self.scale, "tau": "" if self.tau is None else self.tau,
                "quotient": self.quotient, "flag": self.flag}


def _periodic_return(x: SeqWindow, s: float, horizon: int, p: int) -> ReturnRecord:
    for k in range(1, min(p, horizon) + 1):
        d = 0.0 if k == p else distance(x.shift(k), x)
        if d < s:
            flag = "indeterminate" if abs(d - s) <= 1e-12 else "ok"
            return ReturnRecord(s, k, horizon, flag)
    return ReturnRecord(s, NOT_FOUND, horizon, "not_found")


def return_time(x: SeqWindow, s: float, horizon: int,
                tol: float = _pairs.DEFAULT_WALK_TOL, chunk: int = 4096) -> ReturnRecord:
    """First return of x to its own open s-ball within ``horizon`` shifts.

    Periodic points are scanned with exact distances.  Otherwise candidate
    shifts are first filtered by the forced agreement window (when s is
    below the separation of the symbols present) and then decided by a
    thresholded walk; a candidate whose distance is within ``tol`` of s
    makes the record ``indeterminate``.
    """
    if not s > 0:
        raise ValueError("s must be positive")
    if horizon < 1:
        raise ValueError("horizon must be at least 1")
    p = x.period()
    if p is not None:
        return _periodic_return(x, s, horizon, p)

    seg = _pairs.OrbitSegment(x, horizon, _pairs.effective_tol(tol, s))
    n0 = seg.agreement_window(s)
    cand = np.arange(1, horizon + 1)
    if n0 >= 0:
        for m in sorted(range(-n0, n0 + 1), key=abs):
            cand = cand[seg.at(m, cand) == seg.at(m, 0)]
            if cand.size == 0:
                return ReturnRecord(s, NOT_FOUND, horizon, "not_found")
    start = n0 + 1
    for c0 in range(0, cand.size, chunk):
        ks = cand[c0:c0 + chunk]
        zero = np.zeros_like(ks)
        lo, hi = seg.walk(ks, zero, start, s, s)
        hit = np.flatnonzero(lo < s)
        if hit.size:
            i = hit[0]
            flag = "ok" if hi[i] < s else "indeterminate"
            return ReturnRecord(s, int(ks[i]), horizon, flag)
    return ReturnRecord(s, NOT_FOUND, horizon, "not_found")


def recurrence_rates(x: SeqWindow, grid: ScaleGrid, horizon: int,
                     tol: float = _pairs.DEFAULT_WALK_TOL, threads: int = 1):
    """``(lower, upper, series)``: min/max of ``log tau_s / (-log s)`` over
    the scales whose return was found and decided."""
    radii = list(grid)
    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            recs = list(ex.map(lambda s: return_time(x, s, horizon, tol), radii))
    else:
        recs = [return_time(x, s, horizon, tol) for s in radii]
    series = []
    for rec in recs:
        if rec.flag == "ok":
            q = math.log(rec.tau) / -math.log(rec.radius)
        else:
            q = math.nan
        series.append(RecurrenceRow(rec.radius, rec.tau, q, rec.flag))
    good = [r.quotient for r in series if r.flag == "ok"]
    if not good:
        raise ValueError("no scale of the grid produced a decided return within the horizon")
    return min(good), max(good), series
