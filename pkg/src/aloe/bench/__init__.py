"""Synthetic benchmarks, ground-truth sets, F-score metrics and the experiment runner."""

from aloe.bench.cases import (
    PRESETS,
    FittedTruth,
    SyntheticCase,
    build_grid,
    data_case,
    get_case,
    gp_truth_from_data,
    load_table,
    true_S,
)
from aloe.bench.metrics import MetricsRow, f_score

__all__ = [
    "PRESETS",
    "FittedTruth",
    "MetricsRow",
    "SyntheticCase",
    "build_grid",
    "data_case",
    "f_score",
    "get_case",
    "gp_truth_from_data",
    "load_table",
    "true_S",
]
