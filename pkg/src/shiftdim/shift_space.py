"""Bilateral sequence space over a finite embedded alphabet.

Points of ``M^Z`` are stored as a finite centre window ``x_{-N..N}`` plus an
extension policy that supplies every coordinate outside the window.  The
metric is the sub-exponential sum

    r(x, y) = sum_n min(1 / (a_|n| + 1), d(x_n, y_n))

with ``a_n = n**2`` unless another :class:`SequenceMetric` is supplied.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence, Union

import numpy as np
from scipy.special import psi

__all__ = [
    "Alphabet",
    "SequenceMetric",
    "SQUARES",
    "Periodic",
    "Constant",
    "MarkovSampled",
    "SeqWindow",
    "ScaleGrid",
    "distance",
    "window_cutoff",
    "inner_window",
    "in_cylinder_ball",
]


class AlphabetMismatch(ValueError):
    pass


# ---------------------------------------------------------------------------
# alphabet


@dataclass(frozen=True, eq=False)
class Alphabet:
    """Finite labelled point set with a full distance matrix.

    Symbols are referred to by their integer position everywhere inside the
    package; ``labels`` are only used for I/O.
    """

    labels: tuple
    dist: np.ndarray
    sep: float = field(init=False)

    def __post_init__(self):
        d = np.array(self.dist, dtype=float)
        k = len(self.labels)
        if k < 2:
            raise ValueError("an alphabet needs at least 2 symbols")
        if len(set(self.labels)) != k:
            raise ValueError("duplicate alphabet labels")
        if d.shape != (k, k):
            raise ValueError(f"distance matrix must be {k}x{k}, got {d.shape}")
        if np.any(d < 0) or np.any(np.diag(d) != 0):
            raise ValueError("distances must be nonnegative with zero diagonal")
        if not np.allclose(d, d.T, rtol=0, atol=1e-12):
            raise ValueError("distance matrix is not symmetric")
        # d[i, j] <= d[i, l] + d[l, j] for all triples
        if np.any(d[:, None, :] > d[:, :, None] + d[None, :, :] + 1e-12):
            raise ValueError("distance matrix violates the triangle inequality")
        off = d[~np.eye(k, dtype=bool)]
        sep = float(off.min())
        if sep <= 0:
            raise ValueError("distinct symbols must be at positive distance")
        d.setflags(write=False)
        object.__setattr__(self, "dist", d)
        object.__setattr__(self, "sep", sep)

    @classmethod
    def from_matrix(cls, dist, labels: Sequence | None = None) -> "Alphabet":
        dist = np.asarray(dist, dtype=float)
        if labels is None:
            labels = [str(i) for i in range(dist.shape[0])]
        return cls(tuple(labels), dist)

    @classmethod
    def uniform(cls, labels: int | Sequence, spacing: float = 1.0) -> "Alphabet":
        """All distinct symbols at the same mutual distance ``spacing``."""
        if isinstance(labels, int):
            labels = [str(i) for i in range(labels)]
        k = len(labels)
        return cls(tuple(labels), spacing * (1.0 - np.eye(k)))

    @classmethod
    def on_line(cls, points: Sequence[float], labels: Sequence | None = None) -> "Alphabet":
        p = np.asarray(points, dtype=float)
        return cls.from_matrix(np.abs(p[:, None] - p[None, :]), labels)

    @classmethod
    def load(cls, path) -> "Alphabet":
        """Read the text format: a header line holding the symbol count
        (optionally followed by labels), then one whitespace-separated row
        of distances per symbol."""
        with open(path) as fh:
            lines = [ln.split() for ln in fh if ln.strip() and not ln.lstrip().startswith("#")]
        if not lines:
            raise ValueError(f"{path}: empty alphabet file")
        header = lines[0]
        k = int(header[0])
        labels = header[1:] or [str(i) for i in range(k)]
        if len(labels) != k:
            raise ValueError(f"{path}: header names {len(labels)} labels for {k} symbols")
        rows = lines[1:]
        if len(rows) != k or any(len(r) != k for r in rows):
            raise ValueError(f"{path}: expected a {k}x{k} distance matrix")
        return cls.from_matrix([[float(v) for v in r] for r in rows], labels)

    def dump(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(" ".join([str(len(self))] + [str(lb) for lb in self.labels]) + "\n")
            for row in self.dist:
                fh.write(" ".join(repr(float(v)) for v in row) + "\n")

    def __len__(self):
        return len(self.labels)

    def index(self, label) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise KeyError(f"unknown symbol {label!r}") from None

    def indices(self, labels: Sequence) -> np.ndarray:
        return np.array([self.index(lb) for lb in labels], dtype=np.int64)

    def diameter(self, symbols: Sequence[int] | None = None) -> float:
        if symbols is None:
            return float(self.dist.max())
        s = np.asarray(symbols)
        return float(self.dist[np.ix_(s, s)].max())

    def separation(self, symbols: Sequence[int]) -> float:
        s = np.unique(np.asarray(symbols))
        if len(s) < 2:
            raise ValueError("separation needs at least 2 distinct symbols")
        sub = self.dist[np.ix_(s, s)]
        return float(sub[~np.eye(len(s), dtype=bool)].min())


# ---------------------------------------------------------------------------
# metric weights


@dataclass(frozen=True)
class SequenceMetric:
    """Coordinate caps ``1/(a_n + 1)`` and a bound on their one-sided tail.

    ``tail_sum(N)`` must bound ``sum_{n > N} 1/(a_n + 1)`` from above; no
    default is guessed for user-supplied growth sequences.
    """

    growth: Callable[[np.ndarray], np.ndarray]
    tail_sum: Callable[[int], float] | None
    name: str = "custom"

    def __post_init__(self):
        if self.tail_sum is None:
            raise ValueError("a custom growth sequence needs an explicit tail bound")
        a = np.asarray(self.growth(np.arange(64)), dtype=float)
        if np.any(np.diff(a) <= 0) or a[0] < 0:
            raise ValueError("growth sequence must be nonnegative and increasing")

    def cap(self, n) -> np.ndarray:
        n = np.abs(np.asarray(n))
        return 1.0 / (np.asarray(self.growth(n), dtype=float) + 1.0)

    def tail(self, n: int) -> float:
        """Bound on ``sum_{|m| > n} 1/(a_|m| + 1)`` (both sides)."""
        if n < 0:
            return float(self.cap(0)) + 2.0 * self.tail_sum(0)
        return 2.0 * self.tail_sum(n)

    def cutoff_for_tail(self, tol: float) -> int:
        """Smallest N with ``tail(N) <= tol``."""
        lo, hi = 0, 1
        while self.tail(hi) > tol:
            lo, hi = hi, hi * 2
        while lo < hi:
            mid = (lo + hi) // 2
            if self.tail(mid) <= tol:
                hi = mid
            else:
                lo = mid + 1
        return lo


def _square_tail(n: int) -> float:
    # sum_{m>n} 1/(m^2+1) <= integral_n^inf dx/(x^2+1)
    return math.pi / 2 - math.atan(n)


SQUARES = SequenceMetric(growth=lambda n: np.asarray(n, dtype=float) ** 2,
                         tail_sum=_square_tail, name="squares")


# ---------------------------------------------------------------------------
# extension policies


@dataclass(frozen=True, eq=False)
class Periodic:
    """Outside the window, ``x_m = word[m mod k]``."""

    word: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.word, dtype=np.int64)
        if w.ndim != 1 or len(w) == 0:
            raise ValueError("periodic word must be a nonempty 1-d sequence")
        w.setflags(write=False)
        object.__setattr__(self, "word", w)

    @property
    def period(self) -> int:
        return len(self.word)

    def values(self, idx: np.ndarray) -> np.ndarray:
        return self.word[np.mod(idx, self.period)]

    def shifted(self, k: int) -> "Periodic":
        return Periodic(np.roll(self.word, k))


@dataclass(frozen=True)
class Constant:
    symbol: int

    def values(self, idx: np.ndarray) -> np.ndarray:
        return np.full(np.shape(idx), self.symbol, dtype=np.int64)

    def shifted(self, k: int) -> "Constant":
        return self


@dataclass(frozen=True, eq=False)
class MarkovSampled:
    """Coordinates drawn from a seeded orbit stream (see ``measures.OrbitStream``)."""

    stream: object
    offset: int = 0

    @property
    def seed(self) -> int:
        return self.stream.seed

    def values(self, idx: np.ndarray) -> np.ndarray:
        idx = np.asarray(idx)
        if idx.size == 0:
            return np.empty(0, dtype=np.int64)
        lo, hi = int(idx.min()), int(idx.max())
        block = self.stream.coords(lo - self.offset, hi - self.offset)
        return block[idx - lo]

    def shifted(self, k: int) -> "MarkovSampled":
        return MarkovSampled(self.stream, self.offset + k)


Extension = Union[Periodic, Constant, MarkovSampled]


# ---------------------------------------------------------------------------
# points of the sequence space


@dataclass(frozen=True, eq=False)
class SeqWindow:
    alphabet: Alphabet
    center: np.ndarray
    extension: Extension

    def __post_init__(self):
        c = np.asarray(self.center, dtype=np.int64)
        if c.ndim != 1 or len(c) % 2 != 1:
            raise ValueError("window length must be odd (2N+1)")
        if np.any(c < 0) or np.any(c >= len(self.alphabet)):
            raise ValueError("window entry outside the alphabet")
        c.setflags(write=False)
        object.__setattr__(self, "center", c)
        if isinstance(self.extension, (Periodic, MarkovSampled)):
            idx = np.arange(-self.half_width, self.half_width + 1)
            if not np.array_equal(self.extension.values(idx), c):
                raise ValueError("window disagrees with its extension policy")

    @classmethod
    def periodic(cls, alphabet: Alphabet, word: Sequence[int], half_width: int = 0) -> "SeqWindow":
        ext = Periodic(word)
        idx = np.arange(-half_width, half_width + 1)
        return cls(alphabet, ext.values(idx), ext)

    @classmethod
    def constant(cls, alphabet: Alphabet, symbol: int, half_width: int = 0) -> "SeqWindow":
        return cls(alphabet, np.full(2 * half_width + 1, symbol), Constant(symbol))

    @property
    def half_width(self) -> int:
        return (len(self.center) - 1) // 2

    def coords(self, lo: int, hi: int) -> np.ndarray:
        """Symbols ``x_lo .. x_hi`` (inclusive)."""
        idx = np.arange(lo, hi + 1)
        n = self.half_width
        out = np.empty(len(idx), dtype=np.int64)
        inside = (idx >= -n) & (idx <= n)
        out[inside] = self.center[idx[inside] + n]
        if not inside.all():
            out[~inside] = self.extension.values(idx[~inside])
        return out

    def values(self, idx) -> np.ndarray:
        """Symbols at arbitrary integer coordinates."""
        idx = np.asarray(idx, dtype=np.int64)
        n = self.half_width
        out = np.empty(idx.shape, dtype=np.int64)
        inside = (idx >= -n) & (idx <= n)
        out[inside] = self.center[idx[inside] + n]
        if not inside.all():
            out[~inside] = self.extension.values(idx[~inside])
        return out

    def shift(self, k: int) -> "SeqWindow":
        """The point ``T^k x`` with ``(T^k x)_m = x_{m-k}``."""
        # widen by |k| so no stored centre symbol falls back to the extension
        n = self.half_width + abs(k)
        return SeqWindow(self.alphabet, self.coords(-n - k, n - k), self.extension.shifted(k))

    def period(self) -> int | None:
        """Period of the whole sequence if it is a periodic point, else None."""
        ext = self.extension
        if isinstance(ext, Periodic):
            return _minimal_period(ext.word)
        if isinstance(ext, Constant) and np.all(self.center == ext.symbol):
            return 1
        return None

    def periodic_word(self) -> np.ndarray | None:
        """``w`` with ``x_m = w[m mod p]`` for every m, when x is periodic."""
        p = self.period()
        if p is None:
            return None
        return self.coords(0, p - 1)


def _minimal_period(word: np.ndarray) -> int:
    k = len(word)
    for p in range(1, k + 1):
        if k % p == 0 and np.array_equal(word, np.tile(word[:p], k // p)):
            return p
    return k


# ---------------------------------------------------------------------------
# scale grids


@dataclass(frozen=True)
class ScaleGrid:
    radii: tuple
    kind: str
    start: int = 1

    def __post_init__(self):
        r = tuple(float(v) for v in self.radii)
        if not r:
            raise ValueError("empty scale grid")
        if any(not 0 < v < 1 for v in r):
            raise ValueError("grid radii must lie in (0, 1)")
        if any(b >= a for a, b in zip(r, r[1:])):
            raise ValueError("grid radii must be strictly decreasing")
        if self.kind not in ("dyadic", "inverse_square", "explicit"):
            raise ValueError(f"unknown grid kind {self.kind!r}")
        object.__setattr__(self, "radii", r)

    @classmethod
    def inverse_square(cls, count: int, start: int = 1) -> "ScaleGrid":
        if start < 1:
            raise ValueError("inverse_square grids start at k >= 1")
        return cls(tuple(1.0 / (k * k + 1) for k in range(start, start + count)),
                   "inverse_square", start)

    @classmethod
    def dyadic(cls, count: int, start: int = 1) -> "ScaleGrid":
        return cls(tuple(2.0 ** -j for j in range(start, start + count)), "dyadic", start)

    @classmethod
    def explicit(cls, values: Sequence[float]) -> "ScaleGrid":
        return cls(tuple(sorted(values, reverse=True)), "explicit")

    def __iter__(self):
        return iter(self.radii)

    def __len__(self):
        return len(self.radii)

    def labels(self) -> list[int] | None:
        """Integer k of each radius for index-based grids."""
        if self.kind == "explicit":
            return None
        return list(range(self.start, self.start + len(self.radii)))


# ---------------------------------------------------------------------------
# operations


def _check_same(x: SeqWindow, y: SeqWindow):
    a, b = x.alphabet, y.alphabet
    if a is not b and (a.labels != b.labels or not np.array_equal(a.dist, b.dist)):
        raise AlphabetMismatch("windows live over different alphabets")


def window_cutoff(eps: float, metric: SequenceMetric = SQUARES) -> int:
    """The integer ``n0 >= 0`` with ``cap(n0 + 1) <= eps < cap(n0)``.

    For ``a_n = n**2`` this is ``1/((n0+1)^2+1) <= eps < 1/(n0^2+1)``, so
    every point within ``eps`` of x agrees with x to within eps on
    coordinates ``|i| <= n0``.
    """
    if not 0 < eps < 1:
        raise ValueError(f"eps must lie in (0, 1), got {eps}")
    if metric is SQUARES:
        n = max(0, math.ceil(math.sqrt(1.0 / eps - 1.0)) - 1)
    else:
        n = 0
    cap = lambda m: float(metric.cap(m))
    while cap(n + 1) > eps:
        n += 1
    while n > 0 and cap(n) <= eps:
        n -= 1
    return n


def _tail_table(diameter: float, metric: SequenceMetric, explicit: int) -> np.ndarray:
    """``t[n + 1]`` bounds ``sum_{|m| > n} min(cap(m), diameter)`` for n = -1..explicit-1."""
    terms = 2.0 * np.minimum(metric.cap(np.arange(1, explicit + 1)), diameter)
    suffix = np.cumsum(terms[::-1])[::-1] + metric.tail(explicit)
    centre = min(float(metric.cap(0)), diameter)
    return np.concatenate([[suffix[0] + centre], suffix])


def tail_excess(n: int, diameter: float, metric: SequenceMetric = SQUARES,
                explicit: int = 4096) -> float:
    """Upper bound on ``sum_{|m| > n} min(cap(m), diameter)``."""
    if n >= explicit:
        return metric.tail(n)
    return float(_tail_table(diameter, metric, explicit)[n + 1])


def inner_window(eps: float, diameter: float, metric: SequenceMetric = SQUARES,
                 explicit: int = 4096) -> int:
    """Smallest ``n >= -1`` such that agreeing on ``|i| <= n`` forces
    ``r(x, y) < eps`` for sequences whose symbols are at most ``diameter``
    apart.  ``-1`` means the whole space lies inside the ball."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    ok = np.nonzero(_tail_table(diameter, metric, explicit) < eps)[0]
    if ok.size:
        return int(ok[0]) - 1
    n = max(explicit, metric.cutoff_for_tail(eps))
    while metric.tail(n) >= eps:
        n += 1
    return n


def in_cylinder_ball(x: SeqWindow, y: SeqWindow, eps: float, n: int) -> bool:
    """``y in B^n(x, eps)``: ``d(x_i, y_i) < eps`` for every ``|i| <= n``."""
    _check_same(x, y)
    if n < 0:
        raise ValueError("n must be nonnegative")
    if eps <= 0:
        raise ValueError("eps must be positive")
    d = x.alphabet.dist[x.coords(-n, n), y.coords(-n, n)]
    return bool(np.all(d < eps))


def _periodic_class_sum(a: np.ndarray, L: int) -> np.ndarray:
    """``sum_{t >= 0} 1/((a + t L)^2 + 1)`` for each start ``a`` (vectorised)."""
    return psi((np.asarray(a, dtype=float) + 1j) / L).imag / L


def _exact_periodic_distance(x: SeqWindow, y: SeqWindow) -> float | None:
    """Closed-form distance when both tails are periodic and a_n = n^2."""
    ex, ey = x.extension, y.extension
    if not all(isinstance(e, (Periodic, Constant)) for e in (ex, ey)):
        return None
    wx = ex.word if isinstance(ex, Periodic) else np.array([ex.symbol])
    wy = ey.word if isinstance(ey, Periodic) else np.array([ey.symbol])
    L = math.lcm(len(wx), len(wy))
    # beyond K every differing coordinate contributes its full cap
    k_sep = window_cutoff(min(x.alphabet.sep, 0.999999))
    K = max(x.half_width, y.half_width, k_sep + 1)
    d = x.alphabet.dist
    head = np.minimum(SQUARES.cap(np.arange(-K, K + 1)),
                      d[x.coords(-K, K), y.coords(-K, K)]).sum()
    tail = 0.0
    for sign in (1, -1):
        starts = np.arange(K + 1, K + 1 + L)
        differ = wx[np.mod(sign * starts, len(wx))] != wy[np.mod(sign * starts, len(wy))]
        if differ.any():
            tail += _periodic_class_sum(starts[differ], L).sum()
    return float(head + tail)


def distance(x: SeqWindow, y: SeqWindow, tol: float = 1e-6,
             metric: SequenceMetric = SQUARES) -> float:
    """``r(x, y)`` to within ``tol``.

    Sequences with periodic or constant tails are summed in closed form
    (digamma series) under the default metric; otherwise the sum is
    truncated at the smallest ``N`` whose analytic tail bound is below
    ``tol`` and the truncated (lower) sum is returned.
    """
    _check_same(x, y)
    if tol <= 0:
        raise ValueError("tol must be positive")
    if metric is SQUARES:
        exact = _exact_periodic_distance(x, y)
        if exact is not None:
            return exact
    n = metric.cutoff_for_tail(tol)
    d = x.alphabet.dist[x.coords(-n, n), y.coords(-n, n)]
    return float(np.minimum(metric.cap(np.arange(-n, n + 1)), d).sum())
