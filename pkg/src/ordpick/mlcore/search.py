"""Randomized hyperparameter search with k-fold cross-validation.

Two objectives share one candidate sequence: ``accuracy`` maximizes the
fraction of validation rows labelled with their best ordering, ``time``
minimizes the summed cost of the orderings the model picks.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .metrics import accuracy, chosen_cost
from .models import ModelSpec, canonical_family, predict, train

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class IntRange:
    lo: int
    hi: int  # inclusive

    def sample(self, rng: np.random.Generator) -> int:
        return int(rng.integers(self.lo, self.hi + 1))


@dataclass(frozen=True)
class LogUniform:
    lo: float
    hi: float

    def sample(self, rng: np.random.Generator) -> float:
        return float(math.exp(rng.uniform(math.log(self.lo), math.log(self.hi))))


@dataclass(frozen=True)
class Choice:
    options: tuple

    def sample(self, rng: np.random.Generator):
        return self.options[int(rng.integers(len(self.options)))]


# sampled in insertion order, so the order is part of the reproducibility contract
SEARCH_SPACES = {
    "KNN": {"k": IntRange(1, 30), "weighting": Choice(("uniform", "inverse-distance"))},
    "DT": {
        "max_depth": IntRange(2, 20),
        "min_samples_split": IntRange(2, 10),
        "criterion": Choice(("gini", "entropy")),
    },
    "MLP": {
        "hidden_size": IntRange(4, 64),
        "learning_rate": LogUniform(1e-4, 1e-1),
        "epochs": IntRange(50, 400),
        "l2": LogUniform(1e-6, 1e-2),
    },
    "SVM": {"C": LogUniform(1e-3, 1e3), "epochs": IntRange(50, 300), "learning_rate": LogUniform(1e-3, 1e-1)},
}

OBJECTIVES = ("accuracy", "time")


@dataclass
class CVConfig:
    folds: int = 5
    n_candidates: int = 20
    objective: str = "accuracy"
    seed: int = 0

    def __post_init__(self):
        if self.folds < 2:
            raise ValueError("folds must be >= 2")
        if self.n_candidates < 1:
            raise ValueError("n_candidates must be >= 1")
        if self.objective not in OBJECTIVES:
            raise ValueError(f"objective must be one of {OBJECTIVES}")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")


@dataclass
class TrainingSet:
    X: np.ndarray
    y: np.ndarray
    T: list  # TimingRecord per row

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=np.float64)
        self.y = np.asarray(self.y, dtype=np.int64)
        if not len(self.X) == len(self.y) == len(self.T):
            raise ValueError("X, y and T must have one entry per problem")


@dataclass
class CandidateScore:
    spec: ModelSpec
    accuracy: float
    time: float


@dataclass
class SearchResult:
    family: str
    config: CVConfig
    best: ModelSpec
    best_index: int
    candidates: list = field(default_factory=list)  # CandidateScore, in sample order

    @property
    def cv_score(self) -> float:
        c = self.candidates[self.best_index]
        return c.accuracy if self.config.objective == "accuracy" else c.time


def sample_candidates(family: str, n: int, seed: int, space: dict | None = None) -> list[ModelSpec]:
    family = canonical_family(family)
    space = SEARCH_SPACES[family] if space is None else space
    rng = np.random.default_rng(seed)
    return [ModelSpec(family, {name: dist.sample(rng) for name, dist in space.items()}) for _ in range(n)]


def fold_assignment(n_rows: int, folds: int, seed: int) -> np.ndarray:
    """Fold id per row: seeded shuffle, then round-robin."""
    if folds > n_rows:
        raise ValueError(f"{folds} folds but only {n_rows} training rows")
    order = np.random.default_rng(seed).permutation(n_rows)
    out = np.empty(n_rows, dtype=np.int64)
    out[order] = np.arange(n_rows) % folds
    return out


def cv_predictions(spec: ModelSpec, data: TrainingSet, fold_of: np.ndarray, seed: int = 0) -> np.ndarray:
    """Out-of-fold prediction for every training row."""
    pred = np.empty(len(data.y), dtype=np.int64)
    for f in range(int(fold_of.max()) + 1):
        val = fold_of == f
        model = train(spec, data.X[~val], data.y[~val], seed=seed)
        pred[val] = predict(model, data.X[val])
    return pred


def run_search(family: str, data: TrainingSet, cfg: CVConfig, space: dict | None = None) -> SearchResult:
    family = canonical_family(family)
    specs = sample_candidates(family, cfg.n_candidates, cfg.seed, space)
    fold_of = fold_assignment(len(data.y), cfg.folds, cfg.seed)
    scored = []
    for spec in specs:
        pred = cv_predictions(spec, data, fold_of, cfg.seed)
        scored.append(CandidateScore(spec, accuracy(pred, data.y), chosen_cost(pred, data.T)))
        log.debug("%s %s acc=%.4f time=%.6f", family, spec.describe(), scored[-1].accuracy, scored[-1].time)
    if cfg.objective == "accuracy":
        best = max(range(len(scored)), key=lambda i: (scored[i].accuracy, -i))
    else:
        best = min(range(len(scored)), key=lambda i: (scored[i].time, i))
    return SearchResult(family, cfg, specs[best], best, scored)


def cv_search(family: str, data: TrainingSet, cfg: CVConfig, space: dict | None = None) -> ModelSpec:
    return run_search(family, data, cfg, space).best
