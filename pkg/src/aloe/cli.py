"""Command-line interface.

    aloe truth case1
    aloe run --case case3 --strategy ALOE1 --seed 3 --out trace.jsonl
    aloe eta --case case3 --strategy US --budget 100
    aloe bench --config bench.yaml --out metrics.csv
    aloe fit-truth energies.csv --lengthscale 2.5 --noise-variance 0.01 --grid 0 3.6 17 0.4 2.0

Exit status: 0 success, 1 configuration or usage error, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

import numpy as np

from aloe.errors import ConfigError, NumericalError, UsageError

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2

RUN_KEYS = {"case", "strategy", "seed", "budget", "mode", "schedule", "neighbor", "snapshots",
            "initial_points", "stop_on_empty_U"}


def _run_settings(args) -> dict:
    from aloe.config import load_yaml

    doc = load_yaml(args.config) if args.config else {}
    unknown = set(doc) - RUN_KEYS
    if unknown:
        raise ConfigError(f"unknown run config keys: {sorted(unknown)}")
    for key in ("case", "strategy", "seed", "budget", "mode"):
        val = getattr(args, key, None)
        if val is not None:
            doc[key] = val
    if getattr(args, "snapshots", False):
        doc["snapshots"] = True
    doc.setdefault("case", "case3")
    doc.setdefault("strategy", "ALOE1")
    doc.setdefault("seed", 0)
    doc.setdefault("budget", 200)
    doc.setdefault("mode", "finite")
    return doc


def _single_run(settings: dict):
    from aloe.config import BenchConfig, case_from_spec, schedule_for, thresholds_for
    from aloe.driver import LoopConfig, run

    case = case_from_spec(settings["case"])
    strategy = BenchConfig(neighbor=settings.get("neighbor") or {}).strategy(settings["strategy"])
    D, X = case.grid()
    try:
        loop = LoopConfig(
            budget=int(settings["budget"]), seed=int(settings["seed"]), noise_variance=case.sigma2,
            initial_points=int(settings.get("initial_points", 1)), mode=settings["mode"],
            stop_on_empty_U=bool(settings.get("stop_on_empty_U", True)),
            snapshots=bool(settings.get("snapshots", False)),
        )
    except UsageError as exc:
        raise ConfigError(str(exc)) from exc
    result = run(case.f, X, D, strategy, thresholds_for(case), schedule_for(case, settings.get("schedule")),
                 case.kernel, loop)
    return case, X, result


def cmd_truth(args) -> int:
    from aloe.bench.cases import true_S
    from aloe.config import case_from_spec, load_yaml

    spec = load_yaml(args.config).get("case", args.case) if args.config else args.case
    case = case_from_spec(spec)
    _, X = case.grid()
    idx = true_S(case, X)
    for i in idx:
        print(json.dumps({"index": int(i), "x": [float(v) for v in X[i]]}))
    print(f"{case.name}: {len(idx)} local minima among {len(X)} candidates", file=sys.stderr)
    return EXIT_OK


def cmd_run(args) -> int:
    from aloe.bench.cases import true_S
    from aloe.bench.metrics import f_score

    settings = _run_settings(args)
    case, X, result = _single_run(settings)
    out = open(args.out, "w") if args.out else sys.stdout
    try:
        for rec in result.trace:
            out.write(json.dumps(rec.to_dict()) + "\n")
    finally:
        if args.out:
            out.close()
    p, r, f = f_score(true_S(case, X), result.classification.s_hat)
    n_s, n_bar, n_u = result.classification.counts()
    print(f"{case.name}/{settings['strategy']}: {len(result.trace)} steps, |S_hat|={n_s} |S_bar|={n_bar} "
          f"|U|={n_u}, precision={p:.3f} recall={r:.3f} F={f:.3f}", file=sys.stderr)
    return EXIT_OK


def cmd_eta(args) -> int:
    from aloe.config import thresholds_for

    settings = _run_settings(args)
    case, _, result = _single_run(settings)
    eps = thresholds_for(case).eps
    print("step,eta,eta_sq,eps_sq,unknown,complete_guaranteed")
    for rec in result.trace:
        print(f"{rec.t},{rec.eta!r},{rec.eta**2!r},{eps**2!r},{rec.n_unknown},{int(rec.eta**2 <= eps**2)}")
    return EXIT_OK


def cmd_bench(args) -> int:
    from aloe.bench.runner import format_csv, run_benchmark
    from aloe.config import bench_config, load_yaml

    doc = load_yaml(args.config) if args.config else {}
    for key, attr in (("repetitions", "repetitions"), ("horizon", "horizon"), ("master_seed", "seed"),
                      ("workers", "workers")):
        val = getattr(args, attr)
        if val is not None:
            doc[key] = val
    if args.cases:
        doc["cases"] = args.cases.split(",")
    if args.strategies:
        doc["strategies"] = args.strategies.split(",")
    cfg = bench_config(doc)
    table, _ = run_benchmark(cfg)
    text = format_csv(table)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_fit_truth(args) -> int:
    from aloe.bench.cases import build_grid, discrete_minima, gp_truth_from_data, load_table
    from aloe.kernel import KernelParams

    records = load_table(args.data)
    kernel = KernelParams(args.signal_variance, args.lengthscale)
    truth = gp_truth_from_data(records, kernel, args.noise_variance, args.outlier_cutoff)
    summary = {"rows": int(records.shape[0]), "dropped": truth.dropped, "dim": truth.state.dim}
    if args.grid:
        A, B, div, a, b = args.grid
        D, X = build_grid(A, B, int(div), (a, b), truth.state.dim)
        summary["minima"] = [list(m) for m in discrete_minima(truth.f, truth.hess, D, X)]
    print(json.dumps(summary))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="aloe", description=__doc__.split("\n")[0])
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("truth", help="print the true local minima of a case")
    p.add_argument("case", nargs="?", default="case3")
    p.add_argument("--config")
    p.set_defaults(func=cmd_truth)

    for name, func, help_ in (("run", cmd_run, "one run, trace as JSON lines"),
                              ("eta", cmd_eta, "eta_t diagnostic trace as CSV")):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", help="YAML file with run settings")
        p.add_argument("--case")
        p.add_argument("--strategy")
        p.add_argument("--seed", type=int)
        p.add_argument("--budget", type=int)
        p.add_argument("--mode", choices=("finite", "infinite"))
        p.add_argument("--snapshots", action="store_true", help="include per-candidate CIs in each record")
        p.add_argument("--out")
        p.set_defaults(func=func)

    p = sub.add_parser("bench", help="repeated experiments, metrics CSV")
    p.add_argument("--config")
    p.add_argument("--cases", help="comma-separated preset names")
    p.add_argument("--strategies", help="comma-separated strategy names")
    p.add_argument("--repetitions", type=int)
    p.add_argument("--horizon", type=int)
    p.add_argument("--seed", type=int, help="master seed")
    p.add_argument("--workers", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("fit-truth", help="fit a GP truth to a numeric table")
    p.add_argument("data")
    p.add_argument("--lengthscale", type=float, required=True)
    p.add_argument("--signal-variance", type=float, default=1.0)
    p.add_argument("--noise-variance", type=float, default=0.0)
    p.add_argument("--outlier-cutoff", type=float)
    p.add_argument("--grid", type=float, nargs=5, metavar=("A", "B", "DIVISIONS", "a", "b"))
    p.set_defaults(func=cmd_fit_truth)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * args.verbose, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (UsageError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
