"""Repeated experiments: every (case, strategy, repetition) cell, averaged per step."""

from __future__ import annotations

import csv
import hashlib
import io
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from aloe.bench.cases import true_S
from aloe.bench.metrics import MetricsRow, f_score
from aloe.config import BenchConfig, case_from_spec, case_name, schedule_for, thresholds_for
from aloe.driver import LoopConfig, RunResult, run
from aloe.errors import AloeError

log = logging.getLogger(__name__)

CSV_HEADER = ("case", "strategy", "step", "precision_mean", "recall_mean", "fscore_mean")


def derive_seed(master_seed: int, case: str, strategy: str, repetition: int) -> int:
    digest = hashlib.sha256(f"{master_seed}|{case}|{strategy}|{repetition}".encode()).digest()
    return int.from_bytes(digest[:8], "little")


@dataclass
class CellResult:
    case: str
    strategy: str
    repetition: int
    seed: int
    rows: list[MetricsRow]
    result: RunResult | None = None


def step_metrics(truth_idx, result: RunResult, horizon: int) -> list[MetricsRow]:
    """F-score of the estimate after each step 1..horizon.

    A run that stopped early keeps its final estimate for the remaining steps.
    """
    truth = set(int(i) for i in truth_idx)
    rows = []
    trace = result.trace
    for t in range(1, horizon + 1):
        rec = trace[min(t, len(trace)) - 1]
        rows.append(MetricsRow(t, *f_score(truth, rec.s_hat)))
    return rows


def run_cell(spec, strategy_name: str, repetition: int, cfg: BenchConfig, keep_run: bool = False) -> CellResult:
    case = case_from_spec(spec)
    name = case_name(spec)
    D, X = case.grid()
    seed = derive_seed(cfg.master_seed, name, strategy_name, repetition)
    loop = LoopConfig(budget=cfg.horizon, seed=seed, noise_variance=case.sigma2,
                      initial_points=cfg.initial_points, mode=cfg.mode)
    try:
        result = run(case.f, X, D, cfg.strategy(strategy_name), thresholds_for(case),
                     schedule_for(case, cfg.schedule), case.kernel, loop)
    except AloeError as exc:
        raise type(exc)(f"case {name}, strategy {strategy_name}, repetition {repetition}, seed {seed}: {exc}") from exc
    rows = step_metrics(true_S(case, X), result, cfg.horizon)
    log.info("%s/%s rep %d: final F=%.3f after %d steps", name, strategy_name, repetition, rows[-1].f_score, len(result.trace))
    return CellResult(name, strategy_name, repetition, seed, rows, result if keep_run else None)


def _run_cell_args(args):
    return run_cell(*args)


def run_cells(cfg: BenchConfig, keep_runs: bool = False) -> list[CellResult]:
    jobs = [(spec, s, rep, cfg, keep_runs) for spec in cfg.cases for s in cfg.strategies for rep in range(cfg.repetitions)]
    if cfg.workers == 1:
        return [run_cell(*job) for job in jobs]
    with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
        return list(pool.map(_run_cell_args, jobs))


def aggregate(cells: list[CellResult], cfg: BenchConfig) -> list[tuple]:
    """Per-step means over repetitions, in (case, strategy, step) order."""
    groups: dict[tuple[str, str], list[CellResult]] = {}
    for c in cells:
        groups.setdefault((c.case, c.strategy), []).append(c)
    table = []
    for spec in cfg.cases:
        for s in cfg.strategies:
            reps = sorted(groups[(case_name(spec), s)], key=lambda c: c.repetition)
            arr = np.array([[r[1:] for r in c.rows] for c in reps])  # (reps, horizon, 3)
            means = arr.mean(axis=0)
            for t in range(cfg.horizon):
                table.append((case_name(spec), s, t + 1, *(float(v) for v in means[t])))
    return table


def run_benchmark(cfg: BenchConfig, keep_runs: bool = False):
    """Run every cell and return ``(table, cells)``."""
    cells = run_cells(cfg, keep_runs)
    return aggregate(cells, cfg), cells


def format_csv(table) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for case, strategy, step, p, r, f in table:
        w.writerow([case, strategy, step, repr(p), repr(r), repr(f)])
    return buf.getvalue()
