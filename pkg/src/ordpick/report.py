"""Baseline solvers and the comparative results table."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .mlcore.metrics import accuracy, chosen_cost, metric_accuracy_within

SOLVERS = ("DT", "KNN", "MLP", "SVM", "Brown", "sotd", "rand", "VB", "VW")
TIME_ROWS = ("Prediction time (s)", "Total time (s)")
# wall-clock fields; everything else in the CSV twin is reproducible
NONDETERMINISTIC = ("prediction_seconds", "total_seconds")
CSV_FIELDS = ("solver", "prediction_seconds", "total_seconds", "cad_cost", "accuracy")


def _costs(T) -> list:
    return [t.costs if hasattr(t, "costs") else t for t in T]


def baseline_random(T, seed: int) -> list[int]:
    rng = np.random.default_rng(seed)
    return [int(rng.integers(len(c))) for c in _costs(T)]


def baseline_virtual(T, kind: str) -> list[int]:
    if kind not in ("best", "worst"):
        raise ValueError("kind must be 'best' or 'worst'")
    pick = np.argmin if kind == "best" else np.argmax
    # numpy argmin/argmax return the first extreme index
    return [int(pick(np.asarray(c))) for c in _costs(T)]


@dataclass
class SolverResult:
    name: str
    predictions: list
    prediction_seconds: float
    cad_cost: float = 0.0
    accuracy: float = 0.0
    within: dict = field(default_factory=dict)  # x percent -> fraction

    @property
    def total_seconds(self) -> float:
        return self.prediction_seconds + self.cad_cost


def evaluate_solver(name: str, pred: Sequence[int], T, labels: Sequence[int], prediction_seconds: float,
                    within: Sequence[float]) -> SolverResult:
    if len(pred) != len(T):
        raise ValueError(f"{name}: {len(pred)} predictions for {len(T)} test problems")
    return SolverResult(
        name,
        [int(p) for p in pred],
        float(prediction_seconds),
        chosen_cost(pred, T),
        accuracy(pred, labels),
        {float(x): metric_accuracy_within(pred, T, x) for x in within},
    )


def _fmt_x(x: float) -> str:
    return f"{x:g}"


def _cell(v) -> str:
    return "-" if v is None else f"{v:.6f}"


def format_report(results: dict, within: Sequence[float], n_problems: int) -> str:
    """Fixed-width table: one column per solver in ``SOLVERS`` order; absent solvers print '-'."""
    def get(name, attr):
        r = results.get(name)
        return None if r is None else attr(r)

    rows = [
        (TIME_ROWS[0], [_cell(get(s, lambda r: r.prediction_seconds)) for s in SOLVERS]),
        (TIME_ROWS[1], [_cell(get(s, lambda r: r.total_seconds)) for s in SOLVERS]),
        None,
        ("CAD cost", [_cell(get(s, lambda r: r.cad_cost)) for s in SOLVERS]),
        ("Accuracy", [_cell(get(s, lambda r: r.accuracy)) for s in SOLVERS]),
    ]
    for x in within:
        rows.append((f"Accuracy within {_fmt_x(x)}%", [_cell(get(s, lambda r: r.within[float(x)])) for s in SOLVERS]))
    cells = [SOLVERS] + [r[1] for r in rows if r]
    # columns always separated by at least two spaces
    widths = [max(len(c[j]) for c in cells) + 2 for j in range(len(SOLVERS))]
    label_w = max(len(r[0]) for r in rows if r) + 2

    def line(label, values):
        return label.ljust(label_w) + "".join(v.rjust(w) for v, w in zip(values, widths))

    out = [f"Comparative results on {n_problems} test problems", "", line("", SOLVERS)]
    for r in rows:
        out.append("" if r is None else line(*r))
    return "\n".join(out) + "\n"


def write_report(path_txt, path_csv, results: dict, within: Sequence[float], n_problems: int) -> None:
    lengths = {len(r.predictions) for r in results.values()}
    if len(lengths) > 1:
        raise ValueError(f"inconsistent solver result lengths: {sorted(lengths)}")
    with open(path_txt, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(format_report(results, within, n_problems))
    with open(path_csv, "w", encoding="utf-8", newline="") as fh:
        fh.write("# nondeterministic: " + ",".join(NONDETERMINISTIC) + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(list(CSV_FIELDS) + [f"within_{_fmt_x(x)}" for x in within])
        for name in SOLVERS:
            r = results.get(name)
            if r is None:
                continue
            w.writerow([name, repr(r.prediction_seconds), repr(r.total_seconds), repr(r.cad_cost), repr(r.accuracy)]
                       + [repr(r.within[float(x)]) for x in within])


def read_report_csv(path) -> dict:
    """Rows of the CSV twin keyed by solver; values parsed back to floats."""
    with open(path, encoding="utf-8", newline="") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    rows = list(csv.DictReader(lines))
    return {row.pop("solver"): {k: float(v) for k, v in row.items()} for row in rows}
