"""Dimension functionals: energies, mollified energies, covering sums,
correlation sums and the finite-scale quotients built from them.

Every estimator returns an :class:`EstimateReport`.  Exact methods report a
zero standard error; Monte-Carlo methods carry the seed they were run with.
"""

from __future__ import annotations

import functools
import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import pairs as _pairs
from .measures import (
    DEFAULT_CYLINDER_BUDGET,
    BudgetExceeded,
    MarkovMeasure,
    PeriodicOrbitMeasure,
    cylinder_mass,
    min_separation,
)
from .shift_space import SQUARES, ScaleGrid, SeqWindow, distance, inner_window, window_cutoff

METHODS = ("exact_cylinder", "closed_form", "monte_carlo", "greedy_cover", "clique_count")
EXACT_METHODS = ("exact_cylinder", "closed_form", "greedy_cover")

DEFAULT_INNER = 64
CSV_FIELDS = ("method", "eps", "n", "q", "value", "stderr", "n_samples", "seed")


@dataclass(frozen=True)
class EstimateReport:
    value: float
    stderr: float
    n_samples: int
    seed: int | None
    eps: float
    method: str
    q: float | None = None
    n: int | None = None
    lower: float | None = None
    upper: float | None = None
    flag: str = "ok"

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method tag {self.method!r}")
        if self.stderr < 0:
            raise ValueError("stderr must be nonnegative")
        if self.method in EXACT_METHODS and self.stderr != 0:
            raise ValueError("exact methods report stderr = 0")

    def row(self) -> dict:
        return {k: getattr(self, k) for k in CSV_FIELDS}


@dataclass(frozen=True)
class SlopeSeries:
    """Finite-scale quotients; ``lower``/``upper`` are their min/max over the
    unflagged scales (no extrapolation to eps -> 0 is attempted)."""

    eps: tuple
    values: tuple
    quotients: tuple
    flags: tuple
    methods: tuple = ()

    def __post_init__(self):
        if any(b >= a for a, b in zip(self.eps, self.eps[1:])):
            raise ValueError("eps must be strictly decreasing")

    @property
    def points(self) -> list[tuple[float, float]]:
        return list(zip(self.eps, self.values))

    @property
    def slopes(self) -> list[tuple[float, float]]:
        """``(eps, quotient)`` for the unflagged scales."""
        return [(e, v) for e, v, f in zip(self.eps, self.quotients, self.flags) if f == "ok"]

    @property
    def finite(self) -> list[float]:
        return [v for v, f in zip(self.quotients, self.flags) if f == "ok"]

    @property
    def lower(self) -> float:
        f = self.finite
        return min(f) if f else math.nan

    @property
    def upper(self) -> float:
        f = self.finite
        return max(f) if f else math.nan


def _check_q(q, lo=1.0):
    if not q > lo:
        raise ValueError(f"q must exceed {lo}, got {q}")


# ---------------------------------------------------------------------------
# windowed (cylinder) energies


def _markov_word_masses(m: MarkovMeasure, n: int, budget: int) -> np.ndarray:
    s = m.s
    count = s ** (2 * n + 1)
    if count > budget:
        raise BudgetExceeded(f"{count} cylinders exceed the budget of {budget}")
    masses = np.full((1, s), 1.0 / s)
    for _ in range(2 * n):
        masses = (masses[:, :, None] * m.trans[None, :, :]).reshape(-1, s)
    return masses.ravel()


def _periodic_word_masses(m: PeriodicOrbitMeasure, n: int) -> np.ndarray:
    _, counts = np.unique(m.atom_windows(n), axis=0, return_counts=True)
    return counts / m.period


def cylinder_power_sum(m, q: float, n: int, budget: int = DEFAULT_CYLINDER_BUDGET) -> float:
    """``sum_C mu(C)^q`` over the (2n+1)-cylinders, by enumeration."""
    if n < 0:
        return 1.0
    if isinstance(m, MarkovMeasure):
        p = _markov_word_masses(m, n, budget)
    else:
        p = _periodic_word_masses(m, n)
    p = p[p > 0]
    return float(np.sum(p ** q))


def windowed_energy_exact(m, q: float, n: int, budget: int = DEFAULT_CYLINDER_BUDGET) -> float:
    """``I^n(q, eps) = sum_C mu(C^n)^q``, valid for every eps below the
    support separation (where each cylinder ball is the cylinder itself)."""
    _check_q(q)
    if n < 0:
        raise ValueError("n must be nonnegative")
    return cylinder_power_sum(m, q, n, budget)


def markov_energy_closed_form(s: int, kappa: float, q: float, n: int) -> float:
    """``s^(1-q) ((s-1)^(1-q) kappa^q + (1-kappa)^q)^(2n)``."""
    if s < 2 or not 0 < kappa < 1 or n < 0:
        raise ValueError("need s >= 2, 0 < kappa < 1, n >= 0")
    _check_q(q)
    return math.exp(_log_markov_power_sum(s, kappa, q, n))


def _log_markov_power_sum(s: int, kappa: float, q: float, n: int) -> float:
    # the binomial identity behind the closed form holds for every real q > 0
    base = (s - 1) ** (1 - q) * kappa ** q + (1 - kappa) ** q
    return (1 - q) * math.log(s) + 2 * n * math.log(base)


def cylinder_entropy_sum(m, n: int, budget: int = DEFAULT_CYLINDER_BUDGET) -> float:
    """``sum_C mu(C) log mu(C)`` over (2n+1)-cylinders."""
    if n < 0:
        return 0.0
    if isinstance(m, MarkovMeasure):
        row = m.trans[0]
        return float(-math.log(m.s) + 2 * n * np.sum(row * np.log(row)))
    p = _periodic_word_masses(m, n)
    return float(np.sum(p * np.log(p)))


def log_cylinder_energy(m, q: float, n: int, budget: int = DEFAULT_CYLINDER_BUDGET) -> float:
    """``log sum_C mu(C)^q``; closed form for Markov measures, enumeration otherwise."""
    if isinstance(m, MarkovMeasure):
        return _log_markov_power_sum(m.s, m.kappa, q, max(n, 0)) if n >= 0 else 0.0
    return math.log(cylinder_power_sum(m, q, n, budget))


def energy_bracket(m, q: float, eps: float) -> tuple[float, float]:
    """Rigorous cylinder bounds ``(I^{n1}, I^{n0})`` on the ball energy.

    ``C^{n1}(x) ⊆ B(x, eps) ⊆ C^{n0}(x)`` for points of the support, where
    ``n0 = window_cutoff(eps)`` and ``n1`` is the inner window.  Only
    meaningful for eps below the support separation.
    """
    _check_q(q)
    sep = min_separation(m)
    if eps >= sep:
        raise ValueError("cylinder bracketing needs eps below the support separation")
    diam = m.alphabet.diameter(m.support)
    n0 = window_cutoff(eps)
    n1 = inner_window(eps, diam)
    return math.exp(log_cylinder_energy(m, q, n1)), math.exp(log_cylinder_energy(m, q, n0))


# ---------------------------------------------------------------------------
# periodic measures: exact ball and kernel masses


@functools.lru_cache(maxsize=64)
def atom_distances(m: PeriodicOrbitMeasure) -> np.ndarray:
    """Exact sequence-space distances between the atoms of a periodic measure."""
    atoms = m.atoms()
    k = len(atoms)
    D = np.zeros((k, k))
    for i in range(k):
        for j in range(i + 1, k):
            D[i, j] = D[j, i] = distance(atoms[i], atoms[j])
    D.setflags(write=False)
    return D


def mollifier_kernel(d, eps: float):
    """1 on ``[0, eps]``, ``2 - d/eps`` on ``[eps, 2 eps]``, 0 beyond."""
    d = np.asarray(d, dtype=float)
    return np.clip(2.0 - d / eps, 0.0, 1.0)


def periodic_ball_masses(m: PeriodicOrbitMeasure, eps: float) -> np.ndarray:
    return (atom_distances(m) < eps).sum(axis=1) / m.period


def periodic_kernel_masses(m: PeriodicOrbitMeasure, eps: float) -> np.ndarray:
    return mollifier_kernel(atom_distances(m), eps).sum(axis=1) / m.period


def _atoms_near_threshold(m: PeriodicOrbitMeasure, *thresholds: float) -> bool:
    D = atom_distances(m)
    return any(np.any(np.abs(D - t) <= 1e-12 * max(1.0, t)) for t in thresholds)


def _integrate(masses: np.ndarray, q: float) -> float:
    """``int g(mu(B)) dmu`` over uniform atoms, g = t^(q-1) or log t at q = 1."""
    if q == 1:
        return float(np.mean(np.log(masses)))
    return float(np.mean(masses ** (q - 1)))


def periodic_energy(m: PeriodicOrbitMeasure, q: float, eps: float) -> float:
    """Exact ``I(q, eps)`` of a periodic measure for any q > 0."""
    return _integrate(periodic_ball_masses(m, eps), q)


def periodic_mollified_energy(m: PeriodicOrbitMeasure, q: float, eps: float) -> float:
    """Exact ``J(q, eps)`` of a periodic measure for any q > 0."""
    return _integrate(periodic_kernel_masses(m, eps), q)


# ---------------------------------------------------------------------------
# Markov measures: conditional tail sampling


def _esp_mean(vals: np.ndarray, r: int) -> np.ndarray:
    """Row-wise mean of products over r-subsets (unbiased for p^r)."""
    K = vals.shape[1]
    if r > K:
        raise ValueError(f"need at least {r} inner samples for this order")
    e = [np.ones(len(vals))] + [np.zeros(len(vals)) for _ in range(r)]
    for j in range(K):
        v = vals[:, j]
        for t in range(r, 0, -1):
            e[t] = e[t] + e[t - 1] * v
    return e[r] / math.comb(K, r)


class _MarkovPairWalker:
    """Pairs ``(x_i, y_ij)``: x from the measure (or fixed), y drawn from the
    measure conditioned on agreeing with x on the forced window."""

    def __init__(self, m: MarkovMeasure, reach: float, n_outer: int, n_inner: int,
                 rng: np.random.Generator, tol: float, x_fixed: SeqWindow | None = None):
        self.m, self.rng = m, rng
        self.K = n_inner
        s = m.s
        sep = min_separation(m)
        self.n_c = window_cutoff(reach) if (reach <= sep and reach < 1) else -1
        self.tails = _pairs.TailBounds(m.alphabet.diameter(m.support if x_fixed is None else None))
        self.stop = max(self.tails.stop_for(tol), self.n_c + 1)
        self.cdf_f = np.cumsum(m.offset_law(False))
        self.cdf_b = np.cumsum(m.offset_law(True))
        nc = self.n_c
        self.fixed = x_fixed is not None
        if self.fixed:
            n_outer = 1
            self.xc = x_fixed.coords(-self.stop, self.stop)
            if nc >= 0:
                w = cylinder_mass(m, self.xc[self.stop - nc:self.stop + nc + 1])
                end_f = m.positions(self.xc[self.stop + nc])
                end_b = m.positions(self.xc[self.stop - nc])
                self.weights = np.array([w])
                xf = np.array([max(end_f, 0)])
                xb = np.array([max(end_b, 0)])
            else:
                self.weights = np.ones(1)
                xf = xb = np.zeros(1, dtype=np.int64)
        else:
            x0 = rng.integers(s, size=n_outer)
            xf = x0.copy()
            xb = x0.copy()
            if nc >= 0:
                logw = np.full(n_outer, -math.log(s))
                logp = np.log(m.trans)
                for _ in range(nc):
                    nf = (xf + self._inc(self.cdf_f, n_outer)) % s
                    logw += logp[xf, nf]
                    xf = nf
                    nb = (xb + self._inc(self.cdf_b, n_outer)) % s
                    logw += logp[nb, xb]
                    xb = nb
                self.weights = np.exp(logw)
            else:
                self.weights = np.ones(n_outer)
        self.n_outer = n_outer
        self.xf, self.xb = xf, xb
        n_pairs = n_outer * n_inner
        if nc >= 0:
            self.yf = np.repeat(xf, n_inner)
            self.yb = np.repeat(xb, n_inner)
        else:
            y0 = rng.integers(s, size=n_pairs)
            self.yf, self.yb = y0.copy(), y0.copy()
        self.n_pairs = n_pairs

    def _inc(self, cdf, size):
        return np.minimum(np.searchsorted(cdf, self.rng.random(size), side="right"), len(cdf) - 1)

    def fetch(self, m_idx: int, act: np.ndarray):
        st = self.m.states
        outer = act // self.K
        s = self.m.s
        # positions hold coordinate m-1 (or the window ends); step once outward
        if m_idx > 0:
            self.yf[act] = (self.yf[act] + self._inc(self.cdf_f, len(act))) % s
            self.yb[act] = (self.yb[act] + self._inc(self.cdf_b, len(act))) % s
            if not self.fixed:
                u = np.unique(outer)
                self.xf[u] = (self.xf[u] + self._inc(self.cdf_f, len(u))) % s
                self.xb[u] = (self.xb[u] + self._inc(self.cdf_b, len(u))) % s
        yp, ym = st[self.yf[act]], st[self.yb[act]]
        if self.fixed:
            return (np.full(len(act), self.xc[self.stop + m_idx]), yp,
                    np.full(len(act), self.xc[self.stop - m_idx]), ym)
        return st[self.xf[outer]], yp, st[self.xb[outer]], ym

    def run(self, cap: float, resolve: float):
        start = self.n_c + 1
        live = np.repeat(self.weights > 0, self.K)
        lo = np.full(self.n_pairs, np.inf)
        hi = np.full(self.n_pairs, np.inf)
        idx = np.flatnonzero(live)
        if idx.size:
            sub_lo, sub_hi = _pairs.walk_pairs(
                idx.size, lambda mm, act: self.fetch(mm, idx[act]),
                self.m.alphabet.dist, self.tails, start, self.stop, cap, resolve)
            lo[idx], hi[idx] = sub_lo, sub_hi
        return lo.reshape(-1, self.K), hi.reshape(-1, self.K)


def _power_terms(weights, frac_lo, frac_hi, q, ind_lo=None, ind_hi=None):
    """Per-outer integrand bounds for ``mu(B)^(q-1)`` (or log at q = 1)."""
    if q == 1:
        with np.errstate(divide="ignore"):
            return np.log(weights * frac_lo), np.log(weights * frac_hi)
    r = q - 1
    if float(r).is_integer() and ind_lo is not None:
        r = int(r)
        w = weights ** r
        return w * _esp_mean(ind_lo, r), w * _esp_mean(ind_hi, r)
    return (weights * frac_lo) ** r, (weights * frac_hi) ** r


def energy_mc(m, q: float, eps: float, n_outer: int, seed: int,
              n_inner: int = DEFAULT_INNER, tol: float = _pairs.DEFAULT_WALK_TOL) -> EstimateReport:
    """``int mu(B(x, eps))^(q-1) dmu(x)``.

    Periodic measures are evaluated exactly.  For Markov measures each outer
    point's ball mass factors as the exact mass of the forced-agreement
    cylinder times the probability that an independent tail continuation
    stays within eps; the latter is sampled, with truncation error carried
    as a ``[lower, upper]`` bracket whose midpoint is the reported value.
    """
    _check_q(q)
    if eps <= 0:
        raise ValueError("eps must be positive")
    if isinstance(m, PeriodicOrbitMeasure):
        val = _integrate(periodic_ball_masses(m, eps), q)
        flag = "indeterminate" if _atoms_near_threshold(m, eps) else "ok"
        return EstimateReport(val, 0.0, m.period, None, eps, "exact_cylinder", q=q,
                              lower=val, upper=val, flag=flag)
    if n_outer < 100:
        raise ValueError("n_outer must be at least 100")
    rng = np.random.default_rng(seed)
    walker = _MarkovPairWalker(m, eps, n_outer, n_inner, rng, tol)
    lo, hi = walker.run(eps, eps)
    ind_lo = (hi < eps).astype(float)
    ind_hi = (lo < eps).astype(float)
    t_lo, t_hi = _power_terms(walker.weights, ind_lo.mean(1), ind_hi.mean(1), q, ind_lo, ind_hi)
    mid = (t_lo + t_hi) / 2
    flag = "ok" if float(q - 1).is_integer() else "plugin"
    return EstimateReport(float(mid.mean()), float(mid.std(ddof=1) / math.sqrt(n_outer)),
                          n_outer, seed, eps, "monte_carlo", q=q, n=walker.n_c,
                          lower=float(t_lo.mean()), upper=float(t_hi.mean()), flag=flag)


def mollified_ball_mass(m, x: SeqWindow, eps: float, n_inner: int = 4096, seed: int = 0,
                        tol: float = _pairs.DEFAULT_WALK_TOL) -> EstimateReport:
    """``f_eps(mu, x) = int kernel(r(x, y)) dmu(y)``; exact for periodic measures."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    if isinstance(m, PeriodicOrbitMeasure):
        d = np.array([distance(x, a) for a in m.atoms()])
        val = float(mollifier_kernel(d, eps).mean())
        return EstimateReport(val, 0.0, m.period, None, eps, "exact_cylinder", lower=val, upper=val)
    rng = np.random.default_rng(seed)
    walker = _MarkovPairWalker(m, 2 * eps, 1, n_inner, rng, tol, x_fixed=x)
    lo, hi = walker.run(2 * eps, eps)
    k_lo = mollifier_kernel(hi, eps)[0] * walker.weights[0]
    k_hi = mollifier_kernel(lo, eps)[0] * walker.weights[0]
    mid = (k_lo + k_hi) / 2
    return EstimateReport(float(mid.mean()), float(mid.std(ddof=1) / math.sqrt(n_inner)),
                          n_inner, seed, eps, "monte_carlo",
                          lower=float(k_lo.mean()), upper=float(k_hi.mean()))


def mollified_energy(m, q: float, eps: float, n_outer: int = 1000, seed: int = 0,
                     n_inner: int = DEFAULT_INNER,
                     tol: float = _pairs.DEFAULT_WALK_TOL) -> EstimateReport:
    """``J(q, eps) = int f_eps(mu, x)^(q-1) dmu(x)``."""
    _check_q(q)
    if eps <= 0:
        raise ValueError("eps must be positive")
    if isinstance(m, PeriodicOrbitMeasure):
        val = _integrate(periodic_kernel_masses(m, eps), q)
        return EstimateReport(val, 0.0, m.period, None, eps, "exact_cylinder", q=q,
                              lower=val, upper=val)
    if n_outer < 100:
        raise ValueError("n_outer must be at least 100")
    rng = np.random.default_rng(seed)
    walker = _MarkovPairWalker(m, 2 * eps, n_outer, n_inner, rng, tol)
    lo, hi = walker.run(2 * eps, eps)
    k_lo, k_hi = mollifier_kernel(hi, eps), mollifier_kernel(lo, eps)
    t_lo, t_hi = _power_terms(walker.weights, k_lo.mean(1), k_hi.mean(1), q, k_lo, k_hi)
    mid = (t_lo + t_hi) / 2
    return EstimateReport(float(mid.mean()), float(mid.std(ddof=1) / math.sqrt(n_outer)),
                          n_outer, seed, eps, "monte_carlo", q=q,
                          lower=float(t_lo.mean()), upper=float(t_hi.mean()))


# ---------------------------------------------------------------------------
# covering sums


def _greedy_atom_cover(member: np.ndarray) -> list[int]:
    """Centres (rows) covering every atom (column), most-new-atoms first."""
    k = member.shape[1]
    covered = np.zeros(k, dtype=bool)
    centres = []
    while not covered.all():
        gain = (member & ~covered).sum(axis=1)
        c = int(np.argmax(gain))
        centres.append(c)
        covered |= member[c]
    return centres


def _zero_pow(t: np.ndarray, s: float) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    pos = t > 0
    out[pos] = t[pos] ** s
    return out


def _markov_cover_log_bound(m: MarkovMeasure, s: float, cover_eps: float, mass_eps: float) -> float:
    """log of ``#centres * max-mass`` style bound: one centre per inner
    cylinder, each ball mass bounded by its outer-window cylinder."""
    sep = min_separation(m)
    diam = m.alphabet.diameter(m.support)
    n1 = inner_window(cover_eps, diam)
    n0 = window_cutoff(mass_eps) if (mass_eps <= sep and mass_eps < 1) else -1
    n_centres_log = (2 * n1 + 1) * math.log(m.s) if n1 >= 0 else 0.0
    if n0 < 0:
        return n_centres_log
    # each n0-word has s^(2(n1-n0)) inner refinements
    n1 = max(n1, n0)
    return 2 * (n1 - n0) * math.log(m.s) + _log_markov_power_sum(m.s, m.kappa, s, n0)


def _check_s(s):
    if not 0 < s < 1:
        raise ValueError(f"s must lie in (0, 1), got {s}")


def covering_sum_greedy(m, s: float, eps: float) -> EstimateReport:
    """Upper bound on ``S(s, eps) = inf sum mu(B(x_j, eps))^s``.

    Periodic measures: greedy cover of the atoms by atom-centred balls; the
    rest of the space is covered by balls that miss the support and add
    ``0^s = 0``.  Markov measures: one centre per inner-window cylinder.
    """
    _check_s(s)
    if eps <= 0:
        raise ValueError("eps must be positive")
    if isinstance(m, PeriodicOrbitMeasure):
        member = atom_distances(m) < eps
        centres = _greedy_atom_cover(member)
        masses = member[centres].sum(axis=1) / m.period
        val = float(_zero_pow(masses, s).sum())
        return EstimateReport(val, 0.0, len(centres), None, eps, "greedy_cover", q=s,
                              upper=val)
    val = math.exp(_markov_cover_log_bound(m, s, eps, eps))
    return EstimateReport(val, 0.0, 0, None, eps, "greedy_cover", q=s, upper=val)


def mollified_covering_sum(m, s: float, eps: float) -> EstimateReport:
    """Upper bound on ``W(s, eps) = inf sum f_eps(mu, x_j)^s`` (same centres
    as :func:`covering_sum_greedy`)."""
    _check_s(s)
    if eps <= 0:
        raise ValueError("eps must be positive")
    if isinstance(m, PeriodicOrbitMeasure):
        member = atom_distances(m) < eps
        centres = _greedy_atom_cover(member)
        f = periodic_kernel_masses(m, eps)[centres]
        val = float(_zero_pow(f, s).sum())
        return EstimateReport(val, 0.0, len(centres), None, eps, "greedy_cover", q=s, upper=val)
    val = math.exp(_markov_cover_log_bound(m, s, eps, 2 * eps))
    return EstimateReport(val, 0.0, 0, None, eps, "greedy_cover", q=s, upper=val)


def candidate_net(m: PeriodicOrbitMeasure, max_period: int = 3, limit: int = 200) -> list[SeqWindow]:
    """Finite net of X: the atoms, then every periodic point over the
    alphabet with period at most ``max_period`` (distinct points only)."""
    A = m.alphabet
    seen = set()
    net = []

    def add(word):
        # distinct points, not orbits: every rotation is its own centre
        key = tuple(word)
        if key in seen:
            return
        seen.add(key)
        net.append(SeqWindow.periodic(A, list(word)))

    for j in range(m.period):
        add(tuple(np.roll(m.word, j).tolist()))
    for p in range(1, max_period + 1):
        for word in itertools.product(range(len(A)), repeat=p):
            if len(net) >= limit:
                return net
            if p > 1 and any(word == tuple(word[:d]) * (p // d) for d in range(1, p) if p % d == 0):
                continue
            add(word)
    return net


def exhaustive_cover(m: PeriodicOrbitMeasure, s: float, eps: float, net: Sequence[SeqWindow],
                     mollified: bool = False) -> float:
    """Exact infimum of the (mollified) covering sum over covers of the
    support by eps-balls centred at net points."""
    _check_s(s)
    atoms = m.atoms()
    k = len(atoms)
    D = np.array([[distance(c, a) for a in atoms] for c in net])
    member = D < eps
    if mollified:
        cost = _zero_pow(mollifier_kernel(D, eps).sum(axis=1) / k, s)
    else:
        cost = _zero_pow(member.sum(axis=1) / k, s)
    masks = (member * (1 << np.arange(k))).sum(axis=1)
    best_per_mask = {}
    for mk, c in zip(masks.tolist(), cost.tolist()):
        if mk and c < best_per_mask.get(mk, math.inf):
            best_per_mask[mk] = c
    full = (1 << k) - 1
    best = [math.inf] * (full + 1)
    best[0] = 0.0
    for mask in range(1, full + 1):
        for mk, c in best_per_mask.items():
            if mk & mask:
                cand = best[mask & ~mk] + c
                if cand < best[mask]:
                    best[mask] = cand
    return best[full]


# ---------------------------------------------------------------------------
# correlation sums


def correlation_sum_report(x: SeqWindow, q: int, n: int, eps: float,
                           tol: float = _pairs.DEFAULT_WALK_TOL,
                           pair_budget: int = _pairs.DEFAULT_PAIR_BUDGET) -> EstimateReport:
    """``C_q(x, n, eps)``: ordered q-tuples from ``{0..n}`` whose orbit points
    are pairwise within eps, divided by ``n^q``.

    Periodic points are handled through the exact distance matrix of their
    distinct shifts; other orbits through per-pair thresholded walks.
    ``lower``/``upper`` count tolerance-indeterminate pairs as out/in.
    """
    if int(q) != q or q < 2:
        raise ValueError("q must be an integer >= 2")
    q = int(q)
    if n < 1:
        raise ValueError("n must be at least 1")
    if eps <= 0:
        raise ValueError("eps must be positive")
    if q > 4 and n > 2000:
        raise _pairs.PairBudgetExceeded("q > 4 with n > 2000 exceeds the clique budget")
    norm = float(n) ** q
    p = x.period()
    if p is not None:
        D = _pairs.shift_distance_matrix(x, p)
        counts = np.bincount(np.arange(n + 1) % p, minlength=p)
        adj = D <= eps
        total = _pairs.weighted_clique_count(adj, counts, q)
        flag = "indeterminate" if np.any(np.abs(D[~np.eye(p, dtype=bool)] - eps) <= 1e-12) else "ok"
        val = total / norm
        return EstimateReport(val, 0.0, n + 1, None, eps, "clique_count", q=q, n=n,
                              lower=val, upper=val, flag=flag)
    seg = _pairs.OrbitSegment(x, n, _pairs.effective_tol(tol, eps))
    pc = _pairs.PairClassification(seg, eps, pair_budget)
    c = pc.counts()
    mid = pc.clique_count(q, "mid")
    if c["sure"] == c["maybe"]:
        lo = hi = mid
    else:
        lo, hi = pc.clique_count(q, "sure"), pc.clique_count(q, "maybe")
    seed = getattr(x.extension, "seed", None)
    flag = "ok" if lo == hi else "tol_bracket"
    return EstimateReport(mid / norm, 0.0, n + 1, seed, eps, "clique_count", q=q, n=n,
                          lower=lo / norm, upper=hi / norm, flag=flag)


def correlation_sum(x: SeqWindow, q: int, n: int, eps: float,
                    tol: float = _pairs.DEFAULT_WALK_TOL) -> float:
    return correlation_sum_report(x, q, n, eps, tol).value


# ---------------------------------------------------------------------------
# finite-scale dimension quotients


def correlation_dimension_proxy(x: SeqWindow, q: int, n: int, grid: ScaleGrid,
                                tol: float = _pairs.DEFAULT_WALK_TOL) -> SlopeSeries:
    """``log C_q(x, n, eps) / ((q - 1) log eps)`` over the grid."""
    vals, quots, flags = [], [], []
    for eps in grid:
        c = correlation_sum(x, q, n, eps, tol)
        vals.append(c)
        if c > 0:
            quots.append(math.log(c) / ((q - 1) * math.log(eps)))
            flags.append("ok")
        else:
            quots.append(math.nan)
            flags.append("zero_sum")
    return SlopeSeries(tuple(grid), tuple(vals), tuple(quots), tuple(flags),
                       tuple(["clique_count"] * len(vals)))


def _gfd_point(m, q: float, eps: float, budget: int, seed: int, n_outer: int):
    """(log-energy or entropy integral, method, flag) at one scale."""
    if isinstance(m, PeriodicOrbitMeasure):
        masses = periodic_ball_masses(m, eps)
        flag = "indeterminate" if _atoms_near_threshold(m, eps) else "ok"
        if q == 1:
            return float(np.mean(np.log(masses))), "exact_cylinder", flag
        return math.log(_integrate(masses, q)), "exact_cylinder", flag
    if eps < min_separation(m) and eps < 1:
        n0 = window_cutoff(eps)
        if q == 1:
            return cylinder_entropy_sum(m, n0, budget), "closed_form", "ok"
        return log_cylinder_energy(m, q, n0, budget), "closed_form", "ok"
    if q > 1:
        rep = energy_mc(m, q, eps, n_outer, seed)
        if rep.value <= 0:
            return math.nan, "monte_carlo", "zero_mass"
        return math.log(rep.value), "monte_carlo", "ok"
    raise ValueError("q <= 1 above the support separation has no estimator here")


def gfd_proxy(m, q: float, grid: ScaleGrid, budget: int = DEFAULT_CYLINDER_BUDGET,
              seed: int = 0, n_outer: int = 1000) -> SlopeSeries:
    """Per-scale quotients ``log I(q, eps) / ((q - 1) log eps)``; at q = 1 the
    entropy quotient ``int log mu(B(x, eps)) dmu / log eps``.

    Markov measures below their separation use the cylinder energy at
    ``n = window_cutoff(eps)``, which is what the divergence argument bounds.
    """
    if not q > 0:
        raise ValueError("q must be positive")
    vals, quots, flags, methods = [], [], [], []
    for i, eps in enumerate(grid):
        v, method, flag = _gfd_point(m, q, eps, budget, seed + i, n_outer)
        vals.append(v)
        methods.append(method)
        if not math.isfinite(v):
            quots.append(math.nan)
            flags.append(flag if flag != "ok" else "zero_mass")
            continue
        denom = math.log(eps) if q == 1 else (q - 1) * math.log(eps)
        quots.append(v / denom)
        flags.append(flag)
    return SlopeSeries(tuple(grid), tuple(vals), tuple(quots), tuple(flags), tuple(methods))


def renyi_entropy(masses, q: float) -> float:
    """``log(sum p^q) / (1 - q)`` of a probability vector (Shannon at q = 1)."""
    p = np.asarray(masses, dtype=float)
    p = p[p > 0]
    if q == 1:
        return float(-np.sum(p * np.log(p)))
    return float(math.log(np.sum(p ** q)) / (1 - q))


def renyi_profile(m, n: int, q_list: Sequence[float],
                  budget: int = DEFAULT_CYLINDER_BUDGET) -> list[tuple[float, float]]:
    """Rényi entropy of the (2n+1)-cylinder distribution for each q;
    nonincreasing in q."""
    out = []
    for q in q_list:
        _check_q(q)
        out.append((q, math.log(cylinder_power_sum(m, q, n, budget)) / (1 - q)))
    return out
