"""Acceptance suite: one PASS/FAIL line per criterion, printed in the
terminal summary.  Seeds are fixed in advance (0) and never tuned."""

import itertools
import math
import time

import numpy as np
import pytest

from shiftdim import estimators as est
from shiftdim.experiments import ExperimentSpec, _leq, run_experiment, sandwich_scales
from shiftdim.measures import (
    PeriodicOrbitMeasure,
    build_markov,
    enumerate_cylinders,
    min_separation,
    sample_orbit,
)
from shiftdim.shift_space import Alphabet, ScaleGrid

SEED = 0


def markov(s, kappa):
    A = Alphabet.uniform(s)
    return build_markov(s, kappa, list(A.labels), A)


def record(log, num, title, ok, detail, elapsed=None):
    t = "" if elapsed is None else f" [{elapsed:.2f}s]"
    log(f"criterion {num} {title}: {'PASS' if ok else 'FAIL'} ({detail}){t}")
    return ok


def enumerated_configs():
    for s, kappa in itertools.product([2, 3, 4], [0.1, 0.3, 0.5]):
        for n in (1, 2, 3):
            if s ** (2 * n + 1) <= 20000:
                yield s, kappa, n


def periodic_instances():
    yield PeriodicOrbitMeasure(Alphabet.uniform(2), np.arange(2))
    yield PeriodicOrbitMeasure(Alphabet.uniform(3), np.arange(3))
    yield PeriodicOrbitMeasure(Alphabet.on_line([0.0, 0.3, 1.0, 1.6]), np.arange(4))
    yield PeriodicOrbitMeasure(Alphabet.uniform(5), np.array([0, 2, 4, 1, 3]))


def test_closed_form_vs_enumeration(acceptance_log):
    t0 = time.perf_counter()
    worst, count = 0.0, 0
    for s, kappa, n in enumerated_configs():
        m = markov(s, kappa)
        for q in (1.5, 2, 3):
            exact = est.windowed_energy_exact(m, q, n)
            closed = est.markov_energy_closed_form(s, kappa, q, n)
            worst = max(worst, abs(exact - closed) / closed)
            count += 1
    dt = time.perf_counter() - t0
    ok = record(acceptance_log, 1, "closed form vs enumeration", worst <= 1e-10 and dt <= 10,
                f"{count} configurations within the cylinder cap, max rel diff {worst:.2e}", dt)
    assert ok


def test_pesin_convergence(acceptance_log):
    t0 = time.perf_counter()
    m = markov(3, 0.2)
    eps = 0.3 * min_separation(m)
    ref = est.energy_mc(m, 2, eps, 10_000, SEED)
    c2 = est.correlation_sum(sample_orbit(m, 0, SEED), 2, 10_000, eps)
    dt = time.perf_counter() - t0
    dev, band = abs(c2 - ref.value), 3 * ref.stderr + 0.05 * ref.value
    ok = record(acceptance_log, 2, "Pesin convergence", dev <= band and dt <= 60,
                f"C2={c2:.6f} I={ref.value:.6f}+-{ref.stderr:.6f} |dev|={dev:.6f} band={band:.6f}",
                dt)
    assert ok


def test_divergence_direction(acceptance_log):
    t0 = time.perf_counter()
    ser = est.gfd_proxy(markov(3, 0.05), 2, ScaleGrid.inverse_square(11, start=2))
    dt = time.perf_counter() - t0
    q = ser.quotients
    mono = all(b >= a for a, b in zip(q, q[1:]))
    ratio = q[-1] / q[2]
    ok = record(acceptance_log, 3, "divergence direction", mono and ratio >= 2 and dt <= 1,
                f"nondecreasing={mono}, q(k=12)/q(k=4)={ratio:.3f}, "
                f"series={', '.join(f'{v:.4f}' for v in q)}", dt)
    assert ok


def test_periodic_lower_proxy(acceptance_log):
    t0 = time.perf_counter()
    worst_rel, worst_quot = 0.0, 0.0
    for k in (2, 3, 5):
        m = PeriodicOrbitMeasure(Alphabet.uniform(k), np.arange(k))
        for s in (0.3, 0.5, 0.9):
            v = est.covering_sum_greedy(m, s, 1e-6).value
            worst_rel = max(worst_rel, abs(v - k ** (1 - s)) / k ** (1 - s))
            worst_quot = max(worst_quot, math.log(v) / ((s - 1) * math.log(1e-6)))
    dt = time.perf_counter() - t0
    ok = record(acceptance_log, 4, "periodic lower proxy",
                worst_rel <= 1e-12 and worst_quot <= 0.15 and dt <= 5,
                f"max rel dev from k^(1-s) {worst_rel:.1e}, max quotient at 1e-6 {worst_quot:.4f}",
                dt)
    assert ok


def test_sandwich_chains(acceptance_log):
    t0 = time.perf_counter()
    stated = corrected = cover = checks = 0
    for m in periodic_instances():
        net = est.candidate_net(m, max_period=3, limit=200)
        for eps in sandwich_scales(m, 20):
            for q in (1.5, 2, 3):
                I1, I2 = est.periodic_energy(m, q, eps), est.periodic_energy(m, q, 2 * eps)
                J1 = est.periodic_mollified_energy(m, q, eps)
                J2 = est.periodic_mollified_energy(m, q, 2 * eps)
                stated += not (_leq(J1, I1) and _leq(I1, J2))
                corrected += not (_leq(I1, J1) and _leq(J1, I2))
                checks += 1
            for s in (0.3, 0.7):
                I = est.periodic_energy(m, s, eps)
                Sh = est.exhaustive_cover(m, s, eps / 2, net)
                Wh = est.exhaustive_cover(m, s, eps / 2, net, mollified=True)
                S = est.exhaustive_cover(m, s, eps, net)
                cover += not (_leq(I, Sh) and _leq(Sh, Wh) and _leq(Wh, S))
    dt = time.perf_counter() - t0
    ok = record(acceptance_log, 5, "sandwich chains", stated == 0 and cover == 0,
                f"J(e)<=I(e)<=J(2e) violated at {stated}/{checks}; reversed chain "
                f"I(e)<=J(e)<=I(2e) violated at {corrected}/{checks}; covering chain "
                f"violations {cover}", dt)
    assert ok


def test_measure_invariants(acceptance_log):
    worst = 0.0
    for s, kappa, n in enumerated_configs():
        m = markov(s, kappa)
        worst = max(worst, np.abs(m.trans.sum(0) - 1).max(), np.abs(m.trans.sum(1) - 1).max())
        words, masses = enumerate_cylinders(m, n)
        worst = max(worst, abs(masses.sum() - 1))
        for i in range(2 * n + 1):
            marg = np.bincount(words[:, i], weights=masses, minlength=s)
            worst = max(worst, np.abs(marg - 1 / s).max())
    ok = record(acceptance_log, 6, "measure invariants", worst <= 1e-12,
                f"max deviation {worst:.1e}")
    assert ok


def test_renyi_monotonicity(acceptance_log):
    qs = [1.1, 1.5, 2, 2.5, 3, 4, 6]
    violations = total = 0
    measures = [(markov(s, k), n) for s, k, n in enumerated_configs()]
    measures += [(m, n) for m in periodic_instances() for n in (0, 1, 2)]
    for m, n in measures:
        v = [val for _, val in est.renyi_profile(m, n, qs)]
        violations += sum(b > a + 1e-12 * max(1, abs(a)) for a, b in zip(v, v[1:]))
        total += 1
    ok = record(acceptance_log, 7, "Renyi monotonicity", violations == 0,
                f"{violations} violations over {total} measures")
    assert ok


DETERMINISM_SPECS = [
    ExperimentSpec("pesin-convergence", n=(100, 1000), samples=1000, seed=SEED),
    ExperimentSpec("divergence", kappa=0.05, grid_start=2, grid_count=11, seed=SEED),
    ExperimentSpec("periodic-lower", measure_kind="periodic", period=5, s=(0.3, 0.5, 0.9),
                   grid_kind="dyadic", grid_count=6, seed=SEED),
    ExperimentSpec("sandwich", measure_kind="periodic", period=3, seed=SEED),
    ExperimentSpec("recurrence", horizon=20000, grid_count=4, seed=SEED),
]


def test_determinism(acceptance_log):
    same = []
    for spec in DETERMINISM_SPECS:
        a = run_experiment(spec, threads=1).csv_text()
        b = run_experiment(spec, threads=2).csv_text()
        same.append(a == b)
    ok = record(acceptance_log, 8, "determinism", all(same),
                f"{sum(same)}/{len(same)} experiments byte-identical across reruns")
    assert ok
