"""Thresholded pair distances along orbits, and clique counting.

Deciding ``r(x, y) <= eps`` never needs the whole series: once the partial
sum exceeds eps the pair is out, and once partial sum plus the analytic tail
bound is below eps it is in.  :func:`walk_pairs` runs that test for many
pairs at once, one coordinate shell ``{+m, -m}`` per step, dropping decided
pairs as it goes.
"""

from __future__ import annotations

import math

import numpy as np

from .shift_space import SQUARES, SeqWindow, SequenceMetric, _tail_table, distance, window_cutoff

DEFAULT_WALK_TOL = 1e-4
DEFAULT_PAIR_BUDGET = 5 * 10**7


class PairBudgetExceeded(RuntimeError):
    pass


class TailBounds:
    """``after(m)`` bounds ``sum_{|k| > m} min(cap(k), diameter)``."""

    EXPLICIT = 4096

    def __init__(self, diameter: float, metric: SequenceMetric = SQUARES):
        self.metric = metric
        self._table = _tail_table(diameter, metric, self.EXPLICIT)

    def after(self, m: int) -> float:
        if m < self.EXPLICIT:
            return float(self._table[m + 1])
        return self.metric.tail(m)

    def stop_for(self, tol: float) -> int:
        """Smallest shell index whose remaining tail is at most ``tol``."""
        ok = np.nonzero(self._table[1:] <= tol)[0]
        if ok.size:
            return int(ok[0])
        return max(self.EXPLICIT, self.metric.cutoff_for_tail(tol))


def walk_pairs(n_pairs, fetch, dist, tails: TailBounds, start: int, stop: int,
               cap: float, resolve: float):
    """Bracket ``r`` for ``n_pairs`` pairs of sequences.

    ``fetch(m, active)`` returns symbol arrays ``(a+, b+, a-, b-)`` at
    coordinates ``+m`` and ``-m`` for the still-active pairs (the minus pair
    is ignored at ``m == 0``); it is called with strictly increasing ``m``.
    Coordinates ``|m| < start`` are assumed to contribute nothing.

    A pair leaves the walk when its partial sum exceeds ``cap`` or when its
    partial sum plus tail is below ``resolve``.  Returns ``(lo, hi)`` with
    ``lo <= r <= hi``; ``hi`` is ``inf`` for pairs dropped by ``cap``.
    """
    lo = np.zeros(n_pairs)
    hi = np.full(n_pairs, np.inf)
    active = np.arange(n_pairs)
    cap_of = tails.metric.cap
    for m in range(start, stop + 1):
        if active.size == 0:
            return lo, hi
        ap, bp, am, bm = fetch(m, active)
        w = float(cap_of(m))
        inc = np.minimum(w, dist[ap, bp])
        if m > 0:
            inc = inc + np.minimum(w, dist[am, bm])
        part = lo[active] + inc
        lo[active] = part
        t = tails.after(m)
        out = part > cap
        inside = part + t < resolve
        hi[active[inside]] = part[inside] + t
        active = active[~(out | inside)]
    hi[active] = lo[active] + tails.after(stop)
    return lo, hi


# ---------------------------------------------------------------------------
# pairs of points on one orbit


class OrbitSegment:
    """The points ``T^i x`` for ``i = 0..n``.

    Coordinates ``|m| <= min(stop, BLOCK)`` of every point are cached in one
    array; anything farther out is read from the extension on demand.
    """

    BLOCK = 1 << 20

    def __init__(self, x: SeqWindow, n: int, tol: float = DEFAULT_WALK_TOL,
                 metric: SequenceMetric = SQUARES):
        self.x, self.n, self.metric = x, n, metric
        self.tails = TailBounds(x.alphabet.diameter(), metric)
        self.stop = self.tails.stop_for(tol)
        self.tol = tol
        self.reach = min(self.stop, self.BLOCK)
        self.offset = self.reach + n
        self.X = x.coords(-self.offset, self.reach)
        present = np.unique(self.X)
        self.sep = x.alphabet.separation(present) if len(present) > 1 else math.inf

    def at(self, m: int, shift) -> np.ndarray:
        """Coordinate m of ``T^shift x``, i.e. ``x_{m - shift}``."""
        if abs(m) <= self.reach:
            return self.X[m - shift + self.offset]
        return self.x.values(m - np.asarray(shift))

    def words(self, n0: int) -> np.ndarray:
        """Row i is ``(T^i x)_{-n0..n0}``."""
        i = np.arange(self.n + 1)[:, None]
        m = np.arange(-n0, n0 + 1)[None, :]
        return self.X[m - i + self.offset]

    def agreement_window(self, eps: float) -> int:
        """Window on which points within eps must agree exactly, or -1."""
        if eps >= self.sep or eps >= 1:
            return -1
        return window_cutoff(eps, self.metric)

    def agreement_groups(self, n0: int) -> list[np.ndarray]:
        """Classes of shifts whose words on ``|m| <= n0`` coincide.

        Refines one coordinate at a time (0, 1, -1, 2, ...) and stops as
        soon as every class is a singleton.
        """
        ids = np.zeros(self.n + 1, dtype=np.int64)
        shifts = np.arange(self.n + 1)
        for m in sorted(range(-n0, n0 + 1), key=abs):
            sym = self.at(m, shifts)
            _, ids = np.unique(ids * (len(self.x.alphabet)) + sym, return_inverse=True)
            ids = ids.ravel()
            if ids.max() == self.n:
                break
        order = np.argsort(ids, kind="stable")
        bounds = np.flatnonzero(np.diff(ids[order])) + 1
        return np.split(order, bounds)

    def walk(self, i: np.ndarray, j: np.ndarray, start: int, cap: float, resolve: float):
        def fetch(m, act):
            ii, jj = i[act], j[act]
            return self.at(m, ii), self.at(m, jj), self.at(-m, ii), self.at(-m, jj)

        return walk_pairs(len(i), fetch, self.x.alphabet.dist, self.tails, start,
                          self.stop, cap, resolve)


def effective_tol(tol: float, eps: float) -> float:
    """Walk tolerance, shrunk so that pairs well inside eps are decidable."""
    return min(tol, eps / 2)


def group_by_word(words: np.ndarray) -> list[np.ndarray]:
    """Index groups of identical rows (groups of size >= 1, ascending)."""
    _, inv = np.unique(words, axis=0, return_inverse=True)
    inv = inv.ravel()
    order = np.argsort(inv, kind="stable")
    bounds = np.flatnonzero(np.diff(inv[order])) + 1
    return np.split(order, bounds)


def _triu_pairs(idx: np.ndarray):
    a, b = np.triu_indices(len(idx), 1)
    return idx[a], idx[b]


class PairClassification:
    """Per-group adjacency bracketing of ``r(T^i x, T^j x) <= eps``.

    ``sure`` pairs certainly satisfy the bound, ``maybe`` pairs are within
    the tail tolerance of eps, ``mid`` resolves them at the bracket midpoint.
    """

    def __init__(self, seg: OrbitSegment, eps: float, pair_budget: int = DEFAULT_PAIR_BUDGET):
        self.seg, self.eps = seg, eps
        n0 = seg.agreement_window(eps)
        if n0 >= 0:
            groups = seg.agreement_groups(n0)
            start = n0 + 1
        else:
            groups = [np.arange(seg.n + 1)]
            start = 0
        total = sum(len(g) * (len(g) - 1) // 2 for g in groups)
        if total > pair_budget:
            raise PairBudgetExceeded(f"{total} candidate pairs exceed the budget of {pair_budget}")
        self.groups = groups
        self.start = start
        self.n_candidates = total
        # pairs within each group: (i, j, status) with status 2=sure, 1=mid only, 0=maybe-not
        self.pairs = []
        chunk = 2_000_000
        for g in groups:
            if len(g) < 2:
                self.pairs.append((np.empty(0, np.int64), np.empty(0, np.int64), np.empty(0, np.int8)))
                continue
            a, b = _triu_pairs(g)
            status = np.empty(len(a), dtype=np.int8)
            for s in range(0, len(a), chunk):
                lo, hi = seg.walk(a[s:s + chunk], b[s:s + chunk], start, eps, eps)
                st = np.full(len(lo), -1, dtype=np.int8)
                st[hi <= eps] = 2
                undecided = (hi > eps) & (lo <= eps)
                midok = undecided & ((lo + hi) / 2 <= eps)
                st[midok] = 1
                st[undecided & ~midok] = 0
                status[s:s + chunk] = st
            keep = status >= 0
            self.pairs.append((a[keep], b[keep], status[keep]))

    def counts(self) -> dict:
        out = {"sure": 0, "mid": 0, "maybe": 0}
        for _, _, st in self.pairs:
            out["sure"] += int((st == 2).sum())
            out["mid"] += int((st >= 1).sum())
            out["maybe"] += int((st >= 0).sum())
        return out

    def clique_count(self, q: int, level: str = "mid") -> int:
        """Ordered q-tuples (repeats allowed) that are pairwise adjacent."""
        thresh = {"sure": 2, "mid": 1, "maybe": 0}[level]
        n_pts = self.seg.n + 1
        if q == 2:
            return n_pts + 2 * sum(int((st >= thresh).sum()) for _, _, st in self.pairs)
        total = 0
        for g, (a, b, st) in zip(self.groups, self.pairs):
            keep = st >= thresh
            total += _group_cliques(g, a[keep], b[keep], q)
        return total


def _group_cliques(g: np.ndarray, a: np.ndarray, b: np.ndarray, q: int) -> int:
    k = len(g)
    if k == 0:
        return 0
    local = np.full(int(g.max()) + 1, -1, dtype=np.int64)
    local[g] = np.arange(k)
    if len(a) == 0:
        return k
    if q == 3:
        A = np.eye(k, dtype=np.float64)
        A[local[a], local[b]] = 1.0
        A[local[b], local[a]] = 1.0
        return int(round(float((A * (A @ A)).sum())))
    adj = [1 << v for v in range(k)]
    for u, v in zip(local[a].tolist(), local[b].tolist()):
        adj[u] |= 1 << v
        adj[v] |= 1 << u
    return count_ordered_cliques(adj, q)


def count_ordered_cliques(adj: list[int], q: int) -> int:
    """Ordered q-tuples with repetition, pairwise adjacent, from bitset rows.

    ``adj[v]`` must contain v itself.  The recursion intersects candidate
    sets q-2 times and finishes with popcounts.
    """
    full = (1 << len(adj)) - 1

    def rec(cand: int, r: int) -> int:
        if r == 1:
            return cand.bit_count()
        total = 0
        c = cand
        while c:
            low = c & -c
            v = low.bit_length() - 1
            nxt = cand & adj[v]
            total += nxt.bit_count() if r == 2 else rec(nxt, r - 1)
            c ^= low
        return total

    return rec(full, q)


# ---------------------------------------------------------------------------
# periodic orbits: exact distance matrix between distinct shifts


def shift_distance_matrix(x: SeqWindow, p: int, tol: float = 1e-9) -> np.ndarray:
    """``D[a, b] = r(T^a x, T^b x)`` for a periodic point of period p."""
    pts = [x.shift(a) for a in range(p)]
    D = np.zeros((p, p))
    for a in range(p):
        for b in range(a + 1, p):
            D[a, b] = D[b, a] = distance(pts[a], pts[b], tol)
    return D


def weighted_clique_count(adj: np.ndarray, weights: np.ndarray, q: int) -> int:
    """Sum over ordered q-tuples of classes that are pairwise adjacent of the
    product of class sizes (``adj`` must have a true diagonal)."""
    k = len(weights)
    w = [int(v) for v in weights]

    def rec(cand: list[int], r: int) -> int:
        if r == 0:
            return 1
        return sum(w[v] * rec([u for u in cand if adj[v, u]], r - 1) for v in cand)

    return rec(list(range(k)), q)
