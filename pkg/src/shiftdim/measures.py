"""Invariant measures of the full shift with exact cylinder masses.

Two families are implemented: uniform measures on a periodic orbit whose
word has pairwise distinct symbols, and the cyclic Markov chains with
leakage ``kappa``::

    p[i, i+1] = p[s, 1] = 1 - kappa,   every other entry kappa / (s - 1)

The latter matrix is circulant and doubly stochastic, so the uniform vector
is stationary and the time-reversed chain has transition matrix ``p.T``.
"""

from __future__ import annotations

import itertools
import threading
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from .shift_space import Alphabet, MarkovSampled, SeqWindow

__all__ = [
    "PeriodicOrbitMeasure",
    "MarkovMeasure",
    "CylinderWord",
    "OrbitStream",
    "build_markov",
    "cylinder_mass",
    "cylinder_masses",
    "enumerate_cylinders",
    "sample_orbit",
    "min_separation",
]

DEFAULT_CYLINDER_BUDGET = 10**6


class BudgetExceeded(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class CylinderWord:
    """Prescribed symbols ``a_{-n} .. a_n`` (alphabet indices)."""

    symbols: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.symbols, dtype=np.int64)
        if s.ndim != 1 or len(s) % 2 != 1:
            raise ValueError("a cylinder word has odd length 2n+1")
        object.__setattr__(self, "symbols", s)

    @property
    def half_width(self) -> int:
        return (len(self.symbols) - 1) // 2


@dataclass(frozen=True, eq=False)
class PeriodicOrbitMeasure:
    """Uniform measure on the k shifts of the periodic point ``w^Z``."""

    alphabet: Alphabet
    word: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.word, dtype=np.int64)
        if w.ndim != 1 or len(w) == 0:
            raise ValueError("orbit word must be nonempty")
        if len(set(w.tolist())) != len(w):
            raise ValueError("orbit word symbols must be pairwise distinct")
        if np.any(w < 0) or np.any(w >= len(self.alphabet)):
            raise ValueError("orbit word uses symbols outside the alphabet")
        w.setflags(write=False)
        object.__setattr__(self, "word", w)

    @property
    def period(self) -> int:
        return len(self.word)

    @property
    def support(self) -> np.ndarray:
        return self.word

    def atom(self, j: int, half_width: int = 0) -> SeqWindow:
        """The atom ``T^j x`` where ``x_i = word[i mod k]``."""
        return SeqWindow.periodic(self.alphabet, np.roll(self.word, j), half_width)

    def atoms(self, half_width: int = 0) -> list[SeqWindow]:
        return [self.atom(j, half_width) for j in range(self.period)]

    def atom_windows(self, n: int) -> np.ndarray:
        """Row j holds coordinates ``-n..n`` of atom j."""
        i = np.arange(-n, n + 1)
        j = np.arange(self.period)[:, None]
        return self.word[np.mod(i[None, :] - j, self.period)]


@dataclass(frozen=True, eq=False)
class MarkovMeasure:
    """Stationary cyclic Markov chain on ``states`` with leakage ``kappa``."""

    alphabet: Alphabet
    states: np.ndarray
    kappa: float
    trans: np.ndarray = field(init=False)

    def __post_init__(self):
        st = np.asarray(self.states, dtype=np.int64)
        s = len(st)
        if s < 2:
            raise ValueError("a Markov measure needs s >= 2 states")
        if len(set(st.tolist())) != s:
            raise ValueError("duplicate Markov states")
        if np.any(st < 0) or np.any(st >= len(self.alphabet)):
            raise ValueError("Markov state outside the alphabet")
        if not 0 < self.kappa < 1:
            raise ValueError(f"kappa must lie in (0, 1), got {self.kappa}")
        p = np.full((s, s), self.kappa / (s - 1))
        idx = np.arange(s)
        p[idx, (idx + 1) % s] = 1.0 - self.kappa
        if np.abs(p.sum(axis=1) - 1).max() > 1e-12 or np.abs(p.sum(axis=0) - 1).max() > 1e-12:
            raise AssertionError("transition matrix is not doubly stochastic")
        st.setflags(write=False)
        p.setflags(write=False)
        object.__setattr__(self, "states", st)
        object.__setattr__(self, "kappa", float(self.kappa))
        object.__setattr__(self, "trans", p)
        lookup = np.full(len(self.alphabet), -1, dtype=np.int64)
        lookup[st] = idx
        object.__setattr__(self, "_pos", lookup)

    @property
    def s(self) -> int:
        return len(self.states)

    @property
    def support(self) -> np.ndarray:
        return self.states

    @property
    def initial(self) -> np.ndarray:
        return np.full(self.s, 1.0 / self.s)

    def positions(self, symbols) -> np.ndarray:
        """State index of each alphabet symbol, -1 off the state set."""
        return self._pos[np.asarray(symbols)]

    def offset_law(self, backward: bool = False) -> np.ndarray:
        """Law of ``pos_{m+1} - pos_m (mod s)``; the chain is circulant, so
        increments are i.i.d. and independent of the current state."""
        p = self.trans.T if backward else self.trans
        return np.array([p[0, d] for d in range(self.s)])

    def entropy_rate(self) -> float:
        p = self.trans
        return float(-(p * np.log(p)).sum(axis=1).mean())


ShiftMeasure = Union[PeriodicOrbitMeasure, MarkovMeasure]


def build_markov(s: int, kappa: float, states: Sequence, alphabet: Alphabet) -> MarkovMeasure:
    """Markov measure on ``s`` labelled states; labels are alphabet labels."""
    if s < 2:
        raise ValueError("s must be at least 2")
    if len(states) != s:
        raise ValueError(f"expected {s} state labels, got {len(states)}")
    if len(set(states)) != s:
        raise ValueError("duplicate state labels")
    return MarkovMeasure(alphabet, alphabet.indices(states), kappa)


def cylinder_masses(m: ShiftMeasure, words: np.ndarray) -> np.ndarray:
    """Masses of a batch of cylinder words, one per row."""
    words = np.atleast_2d(np.asarray(words, dtype=np.int64))
    if words.shape[1] % 2 != 1:
        raise ValueError("cylinder words have odd length")
    if isinstance(m, MarkovMeasure):
        pos = m.positions(words)
        ok = np.all(pos >= 0, axis=1)
        out = np.zeros(len(words))
        p = pos[ok]
        prod = np.prod(m.trans[p[:, :-1], p[:, 1:]], axis=1) if p.shape[1] > 1 else np.ones(len(p))
        out[ok] = prod / m.s
        return out
    n = (words.shape[1] - 1) // 2
    atoms = m.atom_windows(n)
    hits = (words[:, None, :] == atoms[None, :, :]).all(axis=2).sum(axis=1)
    return hits / m.period


def cylinder_mass(m: ShiftMeasure, c) -> float:
    """Exact mass of the cylinder ``[-n; a_{-n}, ..., a_n]``; zero off support."""
    symbols = c.symbols if isinstance(c, CylinderWord) else np.asarray(c)
    return float(cylinder_masses(m, symbols[None, :])[0])


def enumerate_cylinders(m: ShiftMeasure, n: int, budget: int = DEFAULT_CYLINDER_BUDGET):
    """All ``|support|^(2n+1)`` words over the support with their masses.

    Returns ``(words, masses)``; words are alphabet indices, one per row, in
    lexicographic order of support positions.
    """
    sup = np.asarray(m.support)
    k = len(sup)
    count = k ** (2 * n + 1)
    if count > budget:
        raise BudgetExceeded(f"{count} cylinders exceed the budget of {budget}")
    pos = np.array(list(itertools.product(range(k), repeat=2 * n + 1)), dtype=np.int64)
    words = sup[pos]
    if isinstance(m, MarkovMeasure):
        masses = np.full(count, 1.0 / k)
        for i in range(2 * n):
            masses *= m.trans[pos[:, i], pos[:, i + 1]]
        return words, masses
    return words, cylinder_masses(m, words)


def min_separation(m: ShiftMeasure) -> float:
    """Minimum alphabet distance between distinct support symbols."""
    sup = np.asarray(m.support)
    if len(np.unique(sup)) < 2:
        raise ValueError("min_separation needs a measure with at least 2 distinct symbols")
    return m.alphabet.separation(sup)


# ---------------------------------------------------------------------------
# seeded two-sided orbits


class OrbitStream:
    """A two-sided stationary orbit of a Markov measure, fixed by its seed.

    ``x_0`` is uniform; forward increments come from ``trans`` and backward
    increments from ``trans.T``.  Increments are generated in fixed-size
    blocks, each from its own seed sequence, so any coordinate range is
    reproducible regardless of access order.
    """

    BLOCK = 1 << 16

    def __init__(self, measure: MarkovMeasure, seed: int):
        self.measure = measure
        self.seed = int(seed)
        self._x0 = int(np.random.default_rng(np.random.SeedSequence([self.seed, 0])).integers(measure.s))
        self._cdf = {
            1: np.cumsum(measure.offset_law(backward=False)),
            2: np.cumsum(measure.offset_law(backward=True)),
        }
        self._blocks = {1: [], 2: []}
        self._lock = threading.Lock()

    def _grow(self, direction: int, upto: int):
        blocks = self._blocks[direction]
        s = self.measure.s
        while len(blocks) * self.BLOCK < upto:
            b = len(blocks)
            rng = np.random.default_rng(np.random.SeedSequence([self.seed, direction, b]))
            inc = np.searchsorted(self._cdf[direction], rng.random(self.BLOCK), side="right")
            inc = np.minimum(inc, s - 1)
            start = blocks[-1][-1] if blocks else self._x0
            blocks.append((start + np.cumsum(inc)) % s)

    def _side(self, direction: int, lo: int, hi: int) -> np.ndarray:
        """Positions at distances ``lo..hi`` (>= 1) from the origin."""
        with self._lock:
            self._grow(direction, hi)
            arr = self._blocks[direction]
            first, last = (lo - 1) // self.BLOCK, (hi - 1) // self.BLOCK
            chunk = np.concatenate(arr[first:last + 1])
        off = first * self.BLOCK
        return chunk[lo - 1 - off:hi - off]

    def positions(self, lo: int, hi: int) -> np.ndarray:
        idx_parts = []
        if lo < 0:
            b = self._side(2, max(1, -min(hi, -1)), -lo)
            idx_parts.append(b[::-1])
        if lo <= 0 <= hi:
            idx_parts.append(np.array([self._x0]))
        if hi > 0:
            idx_parts.append(self._side(1, max(lo, 1), hi))
        return np.concatenate(idx_parts).astype(np.int64)

    def coords(self, lo: int, hi: int) -> np.ndarray:
        return self.measure.states[self.positions(lo, hi)]


def sample_orbit(m: MarkovMeasure, half_len: int, seed: int) -> SeqWindow:
    """A measure-typical bilateral point, materialised on ``-half_len..half_len``."""
    if half_len < 0:
        raise ValueError("half_len must be nonnegative")
    stream = OrbitStream(m, seed)
    ext = MarkovSampled(stream)
    return SeqWindow(m.alphabet, stream.coords(-half_len, half_len), ext)
