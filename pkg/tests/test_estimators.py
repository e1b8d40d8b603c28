import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import periodic
from shiftdim import estimators as est
from shiftdim.measures import BudgetExceeded, build_markov, sample_orbit
from shiftdim.pairs import PairBudgetExceeded, count_ordered_cliques
from shiftdim.shift_space import Alphabet, ScaleGrid, SeqWindow, distance


def markov(s, kappa):
    A = Alphabet.uniform(s)
    return build_markov(s, kappa, list(A.labels), A)


# -- reports ------------------------------------------------------------------


def test_report_invariants():
    with pytest.raises(ValueError):
        est.EstimateReport(1.0, 0.1, 10, 0, 0.1, "closed_form")
    with pytest.raises(ValueError):
        est.EstimateReport(1.0, -1.0, 10, 0, 0.1, "monte_carlo")
    with pytest.raises(ValueError):
        est.EstimateReport(1.0, 0.0, 10, 0, 0.1, "bootstrap")
    r = est.EstimateReport(0.5, 0.0, 3, 7, 0.1, "exact_cylinder", q=2, n=1)
    assert list(r.row()) == ["method", "eps", "n", "q", "value", "stderr", "n_samples", "seed"]


# -- cylinder energies --------------------------------------------------------


def test_windowed_energy_examples():
    assert est.windowed_energy_exact(markov(2, 0.5), 2, 1) == pytest.approx(0.125, rel=1e-14)
    for n in range(4):
        assert est.windowed_energy_exact(periodic(4), 2, n) == pytest.approx(0.25)
    v = est.windowed_energy_exact(markov(3, 0.1), 2, 1)
    assert v == pytest.approx((0.5 * 0.01 + 0.81) ** 2 / 3, rel=1e-12)
    assert v == pytest.approx(0.221408, abs=5e-7)


def test_closed_form_examples():
    assert est.markov_energy_closed_form(2, 0.5, 2, 1) == pytest.approx(0.125)
    v = est.markov_energy_closed_form(3, 0.1, 2, 2)
    assert v == pytest.approx(0.815 ** 4 / 3, rel=1e-12)
    assert v == pytest.approx(est.windowed_energy_exact(markov(3, 0.1), 2, 2), rel=1e-12)
    for s, q in [(2, 1.5), (4, 3)]:
        assert est.markov_energy_closed_form(s, 0.3, q, 0) == pytest.approx(s ** (1 - q))


@pytest.mark.parametrize("s,kappa,q,n", [
    c for c in itertools.product([2, 3, 4], [0.1, 0.3, 0.5], [1.5, 2, 3], [1, 2, 3])
    if c[0] ** (2 * c[3] + 1) <= 20000
])
def test_closed_form_equals_enumeration(s, kappa, q, n):
    exact = est.windowed_energy_exact(markov(s, kappa), q, n)
    closed = est.markov_energy_closed_form(s, kappa, q, n)
    assert abs(exact - closed) <= 1e-10 * closed


def test_energy_errors():
    with pytest.raises(ValueError):
        est.windowed_energy_exact(markov(2, 0.5), 1.0, 1)
    with pytest.raises(BudgetExceeded):
        est.windowed_energy_exact(markov(4, 0.5), 2, 6)
    with pytest.raises(ValueError):
        est.markov_energy_closed_form(1, 0.5, 2, 1)
    with pytest.raises(ValueError):
        est.energy_mc(markov(2, 0.5), 2, 0.3, 50, 0)


# -- Monte-Carlo energies -----------------------------------------------------


def test_energy_mc_periodic_exact():
    r = est.energy_mc(periodic(3), 2, 0.5, 100, 0)
    assert r.value == pytest.approx(1 / 3) and r.stderr == 0 and r.method == "exact_cylinder"


def test_energy_mc_within_cylinder_bracket():
    m = markov(2, 0.5)
    r = est.energy_mc(m, 2, 0.3, 2000, seed=4)
    lo, hi = est.energy_bracket(m, 2, 0.3)
    assert lo - 3 * r.stderr <= r.value <= hi + 3 * r.stderr
    assert r.lower <= r.value <= r.upper


def test_energy_mc_matches_direct_pair_sampling():
    # i.i.d. uniform bits: mu(B(x, eps)) does not depend on x, so I(2, eps)
    # is the probability that two independent sequences are within eps
    eps, N, pairs = 0.3, 1000, 40000
    rng = np.random.default_rng(123)
    w = 1.0 / (np.arange(-N, N + 1, dtype=float) ** 2 + 1)
    hits = 0
    for _ in range(pairs // 4000):
        diff = rng.integers(0, 2, (4000, 2 * N + 1)) != rng.integers(0, 2, (4000, 2 * N + 1))
        hits += int(((diff * w).sum(1) < eps).sum())
    p = hits / pairs
    se_direct = math.sqrt(p * (1 - p) / pairs)
    r = est.energy_mc(markov(2, 0.5), 2, eps, 4000, seed=9)
    assert abs(r.value - p) <= 4 * math.hypot(se_direct, r.stderr) + 2e-3


def test_energy_mc_stderr_scaling():
    m = markov(3, 0.2)
    a = est.energy_mc(m, 2, 0.3, 2000, seed=1)
    b = est.energy_mc(m, 2, 0.3, 4000, seed=1)
    assert 0.8 / math.sqrt(2) <= b.stderr / a.stderr <= 1.2 / math.sqrt(2)


def test_energy_mc_q3_positive_and_below_q2():
    m = markov(3, 0.2)
    r2 = est.energy_mc(m, 2, 0.3, 1000, seed=2)
    r3 = est.energy_mc(m, 3, 0.3, 1000, seed=2)
    assert 0 < r3.value < r2.value


def test_energy_mc_above_separation_uses_unconditioned_inner():
    r = est.energy_mc(markov(3, 0.2), 2, 1.5, 500, seed=0)
    assert r.n == -1 and 0 < r.value < 1


# -- mollifier ----------------------------------------------------------------


def test_kernel_shape():
    k = est.mollifier_kernel([0.0, 0.1, 0.15, 0.2, 0.3], 0.1)
    np.testing.assert_allclose(k, [1, 1, 0.5, 0, 0])


def test_mollified_ball_mass_periodic():
    m = periodic(3)
    x = m.atom(1)
    assert est.mollified_ball_mass(m, x, 0.5).value == pytest.approx(1 / 3)
    far = SeqWindow.constant(Alphabet.uniform(3), 0)
    # a constant point is >= 2.1 away from every atom of the 3-cycle
    assert est.mollified_ball_mass(m, far, 0.5).value == 0.0


def test_mollified_energy_periodic():
    assert est.mollified_energy(periodic(3), 2, 0.5).value == pytest.approx(1 / 3)
    for eps in (1e-3, 0.5, 5.0):
        assert est.mollified_energy(periodic(1), 2, eps).value == pytest.approx(1.0)


def test_mollified_mass_between_ball_masses(markov3):
    x = sample_orbit(markov3, 0, seed=8)
    f = est.mollified_ball_mass(markov3, x, 0.2, n_inner=4000, seed=1)
    # f_eps lies between the ball masses at eps and 2 eps; both are
    # bracketed by the cylinders at the two windows
    n_lo = est.window_cutoff(0.2)
    upper = est.cylinder_mass(markov3, x.coords(-n_lo, n_lo))
    assert 0 < f.value <= upper + 3 * f.stderr


@pytest.mark.parametrize("k,alpha", [(2, None), (3, None), (4, [0.0, 0.3, 1.0, 1.6]),
                                     (5, None)])
def test_sandwich_corrected_chain(k, alpha):
    A = Alphabet.on_line(alpha) if alpha else Alphabet.uniform(k)
    m = est.PeriodicOrbitMeasure(A, np.arange(k))
    D = est.atom_distances(m)
    off = D[~np.eye(k, dtype=bool)]
    for eps in np.geomspace(off.min() / 16, 2 * off.max(), 20):
        for q in (1.5, 2, 3):
            I1, I2 = est.periodic_energy(m, q, eps), est.periodic_energy(m, q, 2 * eps)
            J1 = est.periodic_mollified_energy(m, q, eps)
            assert I1 <= J1 * (1 + 1e-12) and J1 <= I2 * (1 + 1e-12)


# -- covering sums ------------------------------------------------------------


@pytest.mark.parametrize("k", [2, 3, 5])
@pytest.mark.parametrize("s", [0.3, 0.5, 0.9])
def test_atom_cover_gives_k_power(k, s):
    r = est.covering_sum_greedy(periodic(k), s, 1e-3)
    assert r.value == pytest.approx(k ** (1 - s), rel=1e-12)
    w = est.mollified_covering_sum(periodic(k), s, 1e-3)
    assert w.value == pytest.approx(k ** (1 - s), rel=1e-12)


def test_cover_examples():
    assert est.covering_sum_greedy(periodic(3), 0.99, 0.5).value == pytest.approx(3 ** 0.01)
    assert est.covering_sum_greedy(periodic(3), 0.5, 10.0).value == pytest.approx(1.0)
    assert est.covering_sum_greedy(markov(3, 0.2), 0.5, 10.0).value == pytest.approx(1.0)
    assert est.mollified_covering_sum(periodic(1), 0.4, 0.01).value == pytest.approx(1.0)
    with pytest.raises(ValueError):
        est.covering_sum_greedy(periodic(3), 1.0, 0.5)


def test_markov_cover_bound_dominates_energy(markov3):
    # any cover by eps-balls bounds I(s, eps) from above
    for eps in (0.3, 0.1):
        S = est.covering_sum_greedy(markov3, 0.5, eps).value
        lo, _ = est.energy_bracket(markov3, 2, eps)
        assert S >= 1.0 > lo


@pytest.mark.parametrize("k", [2, 3, 4])
def test_greedy_not_below_exhaustive(k):
    m = periodic(k)
    net = est.candidate_net(m, max_period=3)
    assert len(net) <= 200
    D = est.atom_distances(m)
    for eps in np.geomspace(0.05, 2 * D.max(), 12):
        for s in (0.3, 0.7):
            g = est.covering_sum_greedy(m, s, eps).value
            assert g >= est.exhaustive_cover(m, s, eps, net) * (1 - 1e-12)


def test_exhaustive_cover_first_links(tri):
    # I(s, eps) <= S*(s, eps/2) <= W*(s, eps/2) on every scale
    m = periodic(3)
    net = est.candidate_net(m)
    for eps in np.geomspace(0.1, 8, 15):
        I = est.periodic_energy(m, 0.5, eps)
        S = est.exhaustive_cover(m, 0.5, eps / 2, net)
        W = est.exhaustive_cover(m, 0.5, eps / 2, net, mollified=True)
        assert I <= S * (1 + 1e-12) and S <= W * (1 + 1e-12)


# -- correlation sums ---------------------------------------------------------


def test_corrsum_examples(tri):
    x = SeqWindow.periodic(tri, [0, 1])
    assert est.correlation_sum(x, 2, 4, 0.5) == pytest.approx(13 / 16)
    n = 50
    assert est.correlation_sum(x, 2, n, 10.0) == pytest.approx((n + 1) ** 2 / n ** 2)
    m = build_markov(3, 0.2, ["0", "1", "2"], tri)
    y = sample_orbit(m, 0, seed=2)
    assert est.correlation_sum(y, 3, 40, 1e-9) == pytest.approx(41 / 40 ** 3)


BRUTE_N = 200_000  # truncation tail 2/N = 1e-5


def _orbit_distances(x, n):
    """Pairwise ``r(T^i x, T^j x)`` truncated at |m| <= BRUTE_N."""
    X = x.coords(-BRUTE_N - n, BRUTE_N)
    m = np.arange(-BRUTE_N, BRUTE_N + 1)
    w = 1.0 / (m.astype(float) ** 2 + 1)
    rows = [X[m - i + BRUTE_N + n] for i in range(n + 1)]
    D = np.zeros((n + 1, n + 1))
    for i in range(n + 1):
        for j in range(i + 1, n + 1):
            D[i, j] = D[j, i] = np.minimum(w, x.alphabet.dist[rows[i], rows[j]]).sum()
    return D


def _cliques(A, q):
    A = A.astype(np.int64)
    if q == 2:
        return A.sum()
    if q == 3:
        return np.einsum("ij,ik,jk->", A, A, A)
    return np.einsum("ij,ik,il,jk,jl,kl->", A, A, A, A, A, A)


@pytest.mark.parametrize("q", [2, 3, 4])
@pytest.mark.parametrize("eps", [0.3, 0.8, 2.0])
def test_corrsum_matches_brute_force(markov3, q, eps):
    x = sample_orbit(markov3, 0, seed=5)
    n = 30
    D = _orbit_distances(x, n)
    assert not np.any(np.abs(D - eps) < 3e-5), "threshold too close to a distance"
    expect = _cliques(D <= eps, q) / n ** q
    r = est.correlation_sum_report(x, q, n, eps, tol=1e-5)
    assert r.lower <= expect + 1e-15 and expect <= r.upper + 1e-15
    assert r.value == pytest.approx(expect, abs=1e-12)


def test_corrsum_guard(markov3):
    x = sample_orbit(markov3, 0, seed=5)
    with pytest.raises(PairBudgetExceeded):
        est.correlation_sum(x, 5, 3000, 0.3)
    with pytest.raises(ValueError):
        est.correlation_sum(x, 1, 30, 0.3)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 9), st.integers(2, 4), st.data())
def test_ordered_clique_count(k, q, data):
    edges = data.draw(st.lists(st.tuples(st.integers(0, k - 1), st.integers(0, k - 1)), max_size=30))
    A = np.eye(k, dtype=bool)
    for u, v in edges:
        A[u, v] = A[v, u] = True
    brute = sum(all(A[a, b] for a, b in itertools.combinations(t, 2))
                for t in itertools.product(range(k), repeat=q))
    rows = [sum(1 << j for j in range(k) if A[i, j]) for i in range(k)]
    assert count_ordered_cliques(rows, q) == brute
    rev = [sum(1 << (k - 1 - j) for j in range(k) if A[i, j]) for i in reversed(range(k))]
    assert count_ordered_cliques(rev, q) == brute


def test_correlation_proxy_periodic_vanishes(tri):
    x = SeqWindow.periodic(tri, [0, 1, 2])
    ser = est.correlation_dimension_proxy(x, 2, 300, ScaleGrid.dyadic(12, 3))
    assert ser.quotients[-1] < ser.quotients[0]
    assert ser.quotients[-1] == pytest.approx(-math.log(est.correlation_sum(x, 2, 300, 2 ** -14))
                                              / (14 * math.log(2)))
    fixed = SeqWindow.constant(tri, 1)
    ser = est.correlation_dimension_proxy(fixed, 2, 100, ScaleGrid.dyadic(5))
    # C_2 = (n+1)^2/n^2 for a fixed point; the quotient is that constant over log eps
    np.testing.assert_allclose(ser.values, (101 / 100) ** 2)


# -- dimension quotients ------------------------------------------------------


@pytest.mark.parametrize("k", [2, 3, 5])
def test_gfd_periodic_exact(k):
    grid = ScaleGrid.explicit([1e-2, 1e-4, 1e-6])
    ser = est.gfd_proxy(periodic(k), 2, grid)
    for e, v in zip(ser.eps, ser.quotients):
        assert v == pytest.approx(-math.log(k) / math.log(e), rel=1e-12)
    assert ser.quotients[-1] == pytest.approx(math.log(k) / math.log(1e6))


def test_gfd_entropy_fixed_point():
    ser = est.gfd_proxy(periodic(1), 1, ScaleGrid.dyadic(6))
    assert all(v == 0 for v in ser.quotients)


def test_gfd_markov_quotients_use_closed_form():
    m = markov(3, 0.05)
    grid = ScaleGrid.inverse_square(11, start=2)
    ser = est.gfd_proxy(m, 2, grid)
    for k, e, v in zip(range(2, 13), ser.eps, ser.quotients):
        closed = est.markov_energy_closed_form(3, 0.05, 2, k - 1)
        assert v == pytest.approx(math.log(closed) / math.log(e), rel=1e-12)
    assert set(ser.methods) == {"closed_form"}


def test_gfd_markov_quotient_grows_eventually():
    # the series dips at coarse scales and then increases without bound
    ser = est.gfd_proxy(markov(3, 0.05), 2, ScaleGrid.inverse_square(200, start=6))
    q = np.array(ser.quotients)
    assert np.all(np.diff(q) > 0)
    assert q[-1] > 2 * q[0]


def test_gfd_quotients_decrease_in_q():
    grid = ScaleGrid.inverse_square(11, start=2)
    a = est.gfd_proxy(markov(3, 0.05), 1.5, grid).quotients
    b = est.gfd_proxy(markov(3, 0.05), 3, grid).quotients
    assert all(y < x for x, y in zip(a, b))


def test_renyi_examples():
    prof = est.renyi_profile(markov(2, 0.5), 1, [1.5, 2, 3])
    for _, v in prof:
        assert v == pytest.approx(math.log(8))
    assert est.renyi_entropy([0.9, 0.1], 2) == pytest.approx(-math.log(0.82))
    assert est.renyi_entropy([0.9, 0.1], 3) == pytest.approx(-0.5 * math.log(0.73))
    v = [v for _, v in est.renyi_profile(markov(3, 0.1), 1, [1.5, 2, 3])]
    assert v[0] >= v[1] >= v[2]


def test_slope_series_requires_decreasing_eps():
    with pytest.raises(ValueError):
        est.SlopeSeries((0.1, 0.2), (1, 1), (1, 1), ("ok", "ok"))
