import math

import numpy as np
import pytest

from conftest import periodic
from shiftdim.measures import sample_orbit
from shiftdim.recurrence import ReturnRecord, recurrence_rates, return_time
from shiftdim.shift_space import Alphabet, Constant, ScaleGrid, SeqWindow, distance


def test_fixed_point_returns_immediately(tri):
    x = SeqWindow.constant(tri, 2)
    for s in (1e-9, 0.5, 3.0):
        assert return_time(x, s, 10).tau == 1


def test_periodic_point_returns_at_period(tri):
    x = periodic(5).atom(0)
    D = min(distance(x.shift(k), x) for k in range(1, 5))
    for s in (D * 0.99, 1e-4, 1e-9):
        assert return_time(x, s, 100).tau == 5
    assert return_time(x, D * 1.01, 100).tau < 5
    assert return_time(x, 1e-3, 4).tau is None


def test_large_radius_returns_at_one(tri):
    x = SeqWindow.periodic(tri, [0, 1, 2, 2])
    assert return_time(x, 4.0, 10).tau == 1


def test_record_validation():
    with pytest.raises(ValueError):
        ReturnRecord(0.1, 0, 10)
    with pytest.raises(ValueError):
        ReturnRecord(0.1, 11, 10)
    with pytest.raises(ValueError):
        return_time(SeqWindow.constant(Alphabet.uniform(2), 0), 0.1, 0)


def test_sampled_orbit_matches_scan(markov3):
    x = sample_orbit(markov3, 0, seed=3)
    N = 200_000
    m = np.arange(-N, N + 1)
    w = 1.0 / (m.astype(float) ** 2 + 1)
    for s in (0.9, 0.5):
        rec = return_time(x, s, 5000, tol=1e-5)
        assert rec.found
        X = x.coords(-N - rec.tau, N)
        base = X[m + N + rec.tau]
        for k in range(1, rec.tau + 1):
            d = np.minimum(w, x.alphabet.dist[X[m - k + N + rec.tau], base]).sum()
            # truncated sums undershoot by at most 1e-5
            if k < rec.tau:
                assert d >= s - 1e-5
            else:
                assert d < s


def test_return_time_nonincreasing_in_radius(markov3):
    x = sample_orbit(markov3, 0, seed=4)
    radii = [1.5, 1.0, 0.7, 0.5, 0.35, 0.25]
    taus = [return_time(x, s, 20000).tau for s in radii]
    found = [t for t in taus if t is not None]
    assert found == sorted(found)
    # once a scale is not found, no finer scale is found either
    first_missing = next((i for i, t in enumerate(taus) if t is None), len(taus))
    assert all(t is None for t in taus[first_missing:])


def test_periodic_rates():
    lo, hi, series = recurrence_rates(periodic(5).atom(0), ScaleGrid.explicit([1e-3, 1e-6]), 50)
    assert series[-1].quotient == pytest.approx(math.log(5) / math.log(1e6))
    assert series[-1].quotient == pytest.approx(0.1165, abs=5e-5)
    assert lo == series[-1].quotient and hi == series[0].quotient


def test_fixed_point_rates(tri):
    lo, hi, series = recurrence_rates(SeqWindow.constant(tri, 0), ScaleGrid.dyadic(8), 5)
    assert lo == hi == 0.0
    assert [r.row()["tau"] for r in series] == [1] * 8


def test_all_scales_missing_is_an_error(tri):
    x = SeqWindow(tri, np.array([1, 2, 0]), Constant(0))
    # x_{-1}, x_0, x_1 = 1, 2, 0 never reappear in the constant tail
    with pytest.raises(ValueError):
        recurrence_rates(x, ScaleGrid.explicit([0.05, 0.01]), 50)


def test_markov_orbit_rates(markov3):
    # coarse scales return within the horizon; quotients are nonnegative
    x = sample_orbit(markov3, 0, seed=3)
    lo, hi, series = recurrence_rates(x, ScaleGrid.inverse_square(4), 100_000)
    assert lo >= 0
    flags = [r.flag for r in series]
    assert flags[0] == "ok"
    assert all(r.tau is None for r in series if r.flag == "not_found")
