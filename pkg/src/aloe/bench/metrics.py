"""Precision, recall and F-score of an estimated minimum set."""

from __future__ import annotations

from typing import Hashable, Iterable, NamedTuple

from aloe.errors import UsageError


class MetricsRow(NamedTuple):
    step: int
    precision: float
    recall: float
    f_score: float


def f_score(truth: Iterable[Hashable], estimate: Iterable[Hashable]) -> tuple[float, float, float]:
    """(precision, recall, F) of ``estimate`` against a non-empty ``truth``.

    Members may be candidate indices or point keys; an empty estimate scores 0.
    """
    truth = set(truth)
    estimate = set(estimate)
    if not truth:
        raise UsageError("the true minimum set is empty; F-score is undefined")
    hits = len(truth & estimate)
    precision = hits / len(estimate) if estimate else 0.0
    recall = hits / len(truth)
    if precision + recall == 0:
        return precision, recall, 0.0
    return precision, recall, 2 * precision * recall / (precision + recall)
