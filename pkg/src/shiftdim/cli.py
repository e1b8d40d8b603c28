"""Command-line entry point: ``shiftdim {energy,corrsum,cover,recur,experiment}``.

Exit status is 0 on success or PASS, 2 when an experiment's criteria are
not met, and 1 on any error.
"""

from __future__ import annotations

import argparse
import sys

from . import estimators as est
from .experiments import (
    ConfigError,
    ExperimentResult,
    build_measure,
    load_spec,
    parse_config,
    run_experiment,
)
from .measures import BudgetExceeded, MarkovMeasure, sample_orbit
from .pairs import PairBudgetExceeded
from .recurrence import recurrence_rates
from .shift_space import ScaleGrid

MEASURE_KEYS = {"measure_kind": "kind", "states": "states", "kappa": "kappa",
                "period": "period", "alphabet": "alphabet"}


def _floats(text: str) -> list[float]:
    return [float(t) for t in text.replace(",", " ").split()]


def _ints(text: str) -> list[int]:
    return [int(float(t)) for t in text.replace(",", " ").split()]


def parse_measure(text: str):
    """``markov:S:KAPPA`` or ``periodic:K``."""
    parts = text.split(":")
    try:
        if parts[0] == "markov" and len(parts) == 3:
            return build_measure("markov", (parts[1],), float(parts[2]))
        if parts[0] == "periodic" and len(parts) == 2:
            return build_measure("periodic", period=int(parts[1]))
    except ValueError:
        pass
    raise ConfigError(f"bad measure {text!r}; use markov:S:KAPPA or periodic:K")


def _config_kw(args) -> dict:
    if not getattr(args, "config", None):
        return {}
    with open(args.config) as fh:
        return parse_config(fh.read())


def _measure(args):
    if args.measure:
        return parse_measure(args.measure)
    kw = _config_kw(args)
    picked = {MEASURE_KEYS[k]: v for k, v in kw.items() if k in MEASURE_KEYS}
    if not picked:
        raise ConfigError("no measure given (use --measure or a config with measure.* keys)")
    return build_measure(**picked)


def _grid(args, default_count: int = 10) -> ScaleGrid:
    if args.eps:
        return ScaleGrid.explicit(_floats(args.eps))
    return ScaleGrid.inverse_square(args.grid_count or default_count, args.grid_start)


def _emit(res: ExperimentResult, args) -> None:
    if args.out:
        res.write(args.out)
    else:
        sys.stdout.write(res.csv_text())


def cmd_energy(args) -> int:
    m = _measure(args)
    res = ExperimentResult("energy")
    for q in _floats(args.q):
        if args.n is not None:
            for n in _ints(args.n):
                v = est.windowed_energy_exact(m, q, n, args.budget)
                res.add(experiment="energy", method="exact_cylinder", eps="", n=n, q=q, value=v,
                        stderr=0.0, n_samples=0, seed="", flag="ok")
            continue
        for i, e in enumerate(_grid(args)):
            res.add(est.energy_mc(m, q, e, args.samples, args.seed + i))
    _emit(res, args)
    return 0


def cmd_corrsum(args) -> int:
    m = _measure(args)
    x = sample_orbit(m, 0, args.seed) if isinstance(m, MarkovMeasure) else m.atom(0)
    res = ExperimentResult("corrsum")
    for n in _ints(args.n):
        for e in _grid(args):
            res.add(est.correlation_sum_report(x, args.q, n, e), seed=args.seed)
    _emit(res, args)
    return 0


def cmd_cover(args) -> int:
    m = _measure(args)
    res = ExperimentResult("cover")
    for s in _floats(args.s):
        for e in _grid(args):
            res.add(est.covering_sum_greedy(m, s, e), seed=args.seed, flag="S")
            res.add(est.mollified_covering_sum(m, s, e), seed=args.seed, flag="W")
    _emit(res, args)
    return 0


def cmd_recur(args) -> int:
    m = _measure(args)
    if isinstance(m, MarkovMeasure):
        x, method = sample_orbit(m, 0, args.seed), "clique_count"
    else:
        x, method = m.atom(0), "exact_cylinder"
    _, _, series = recurrence_rates(x, _grid(args), args.horizon, threads=args.threads)
    res = ExperimentResult("recur")
    for r in series:
        res.add(experiment="recur", method=method, eps=r.scale, n="" if r.tau is None else r.tau,
                value=r.quotient, stderr=0.0, n_samples=args.horizon, seed=args.seed, flag=r.flag)
    _emit(res, args)
    return 0


def cmd_experiment(args) -> int:
    if not args.config:
        raise ConfigError("experiment needs --config PATH")
    overrides = {"seed": args.seed if args.seed_given else None}
    spec = load_spec(args.config, **overrides)
    out = args.out or spec.out
    res = run_experiment(spec, threads=args.threads)
    if out:
        res.write(out)
    else:
        sys.stdout.write(res.csv_text())
    status = "PASS" if res.passed else "FAIL"
    print(f"{spec.name}: {status}", file=sys.stderr)
    return 0 if res.passed else 2


def _global_flags(p: argparse.ArgumentParser, suppress: bool) -> None:
    d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    p.add_argument("--config", metavar="PATH", default=d(None))
    p.add_argument("--seed", type=int, metavar="N", default=d(None))
    p.add_argument("--out", metavar="DIR", default=d(None))
    p.add_argument("--threads", type=int, metavar="N", default=d(1))
    p.add_argument("--format", choices=["csv"], default=d("csv"))


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="shiftdim", description=__doc__.splitlines()[0])
    _global_flags(p, suppress=False)
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, fn, help_):
        sp = sub.add_parser(name, help=help_)
        _global_flags(sp, suppress=True)
        sp.set_defaults(func=fn)
        return sp

    def scales(sp, count=None):
        sp.add_argument("--eps", help="comma-separated radii (overrides the grid)")
        sp.add_argument("--grid-count", type=int, default=count)
        sp.add_argument("--grid-start", type=int, default=1)

    sp = add("energy", cmd_energy, "energy function (exact, closed form or Monte Carlo)")
    sp.add_argument("--measure")
    sp.add_argument("--q", default="2")
    sp.add_argument("--n", help="cylinder windows: report exact windowed energies instead")
    sp.add_argument("--samples", type=int, default=10000)
    sp.add_argument("--budget", type=int, default=est.DEFAULT_CYLINDER_BUDGET)
    scales(sp, 5)

    sp = add("corrsum", cmd_corrsum, "correlation sums along one orbit")
    sp.add_argument("--measure")
    sp.add_argument("--q", type=int, default=2)
    sp.add_argument("--n", default="1000")
    scales(sp, 5)

    sp = add("cover", cmd_cover, "greedy covering and mollified covering sums")
    sp.add_argument("--measure")
    sp.add_argument("--s", default="0.5")
    scales(sp, 5)

    sp = add("recur", cmd_recur, "return times and recurrence quotients")
    sp.add_argument("--measure")
    sp.add_argument("--horizon", type=int, required=True)
    scales(sp, 10)

    add("experiment", cmd_experiment, "run a configured experiment (exit 2 on FAIL)")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    args.seed_given = args.seed is not None
    if args.seed is None:
        args.seed = 0
    if args.threads < 1:
        parser.error("--threads must be at least 1")
    try:
        return args.func(args)
    except (ConfigError, BudgetExceeded, PairBudgetExceeded, ValueError, KeyError, OSError) as e:
        print(f"shiftdim: error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
