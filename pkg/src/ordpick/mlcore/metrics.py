"""Evaluation metrics over per-ordering cost records."""

from __future__ import annotations

from typing import Sequence

import numpy as np


def _costs(T) -> list:
    return [t.costs if hasattr(t, "costs") else t for t in T]


def accuracy(pred: Sequence[int], y: Sequence[int]) -> float:
    pred, y = np.asarray(pred), np.asarray(y)
    if len(pred) != len(y):
        raise ValueError("prediction and label vectors differ in length")
    if len(y) == 0:
        return 0.0
    return float(np.mean(pred == y))


def metric_accuracy_within(pred: Sequence[int], T, x_percent: float) -> float:
    """Fraction of problems whose chosen cost is within ``x_percent`` of the best."""
    if x_percent < 0:
        raise ValueError("x_percent must be >= 0")
    costs = _costs(T)
    if len(pred) != len(costs):
        raise ValueError("predictions and timing records differ in length")
    if not costs:
        return 0.0
    hits = sum(c[int(p)] <= (1.0 + x_percent / 100.0) * min(c) for p, c in zip(pred, costs))
    return hits / len(costs)


def chosen_cost(pred: Sequence[int], T) -> float:
    costs = _costs(T)
    if len(pred) != len(costs):
        raise ValueError("predictions and timing records differ in length")
    return float(sum(c[int(p)] for p, c in zip(pred, costs)))


def metric_total_time(pred: Sequence[int], T, prediction_seconds: float) -> float:
    return prediction_seconds + chosen_cost(pred, T)
