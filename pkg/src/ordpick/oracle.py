"""Per-ordering cost measurement.

Two back ends share one interface:

* ``surrogate`` -- deterministic cost ``unit * sotd_score``; an ordering whose
  projection blows up past the caps counts as a timeout.
* ``external`` -- runs a command per ordering and times it on the wall clock.
  The template gets ``{input}`` (a terms-format file), ``{ordering}`` (the
  permutation, comma separated) and ``{timeout}`` (seconds).

A timed-out ordering stores the timeout value itself as its cost.
"""

from __future__ import annotations

import csv
import logging
import os
import shlex
import subprocess
import tempfile
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

from .polysys import PolySystem, VariableOrdering, enumerate_orderings, serialize_problem
from .projection import Blowup, Caps, sotd_score

log = logging.getLogger(__name__)

# surrogate costs are kept strictly positive for systems whose projection is empty
MIN_SURROGATE_SCORE = 1e-6


class Timeout:
    """Marker returned when an ordering did not finish; ``cause`` says why."""

    __slots__ = ("cause",)

    def __init__(self, cause: str = "timeout"):
        self.cause = cause

    def __repr__(self) -> str:
        return f"Timeout({self.cause!r})"

    def __eq__(self, other) -> bool:
        return isinstance(other, Timeout) and other.cause == self.cause


@dataclass
class OracleConfig:
    kind: str = "surrogate"
    timeout_seconds: float = 3600.0
    command_template: str = ""
    caps: Caps = field(default_factory=Caps)
    surrogate_unit: float = 1.0
    jobs: int = 1
    grace_seconds: float = 2.0

    def __post_init__(self):
        if self.kind not in ("surrogate", "external"):
            raise ValueError(f"unknown oracle kind {self.kind!r}")
        if not self.timeout_seconds > 0:
            raise ValueError("timeout_seconds must be positive")
        if not self.surrogate_unit > 0:
            raise ValueError("surrogate_unit must be positive")
        if self.kind == "external":
            missing = [p for p in ("{input}", "{ordering}", "{timeout}") if p not in self.command_template]
            if missing:
                raise ValueError(f"command template lacks placeholders {missing}")


@dataclass
class TimingRecord:
    problem_id: int
    costs: list
    timed_out: list

    def __post_init__(self):
        if len(self.costs) != len(self.timed_out):
            raise ValueError("costs and timed_out differ in length")


def surrogate_cost(p: PolySystem, o: VariableOrdering, cfg: OracleConfig, cache: dict | None = None):
    try:
        score = sotd_score(p, o, cfg.caps, cache)
    except Blowup:
        return Timeout("blowup")
    return cfg.surrogate_unit * max(score, MIN_SURROGATE_SCORE)


def external_run(cfg: OracleConfig, p: PolySystem, o: VariableOrdering):
    """Run the external command once and return elapsed wall seconds or a Timeout."""
    fd, path = tempfile.mkstemp(prefix="ordpick_", suffix=".txt")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(serialize_problem(p) + "\n")
        cmd = cfg.command_template.format(
            input=shlex.quote(path), ordering=",".join(map(str, o.perm)), timeout=repr(float(cfg.timeout_seconds))
        )
        argv = shlex.split(cmd)
        t0 = time.perf_counter()
        try:
            proc = subprocess.Popen(argv, stdout=subprocess.DEVNULL, stderr=subprocess.DEVNULL)
        except OSError as exc:
            log.warning("could not start %r: %s", argv[0] if argv else cmd, exc)
            return Timeout("spawn-failure")
        try:
            rc = proc.wait(timeout=cfg.timeout_seconds)
        except subprocess.TimeoutExpired:
            proc.kill()
            try:
                proc.wait(timeout=cfg.grace_seconds)
            except subprocess.TimeoutExpired:
                log.error("child %d did not die within the grace period", proc.pid)
            return Timeout("timeout")
        elapsed = time.perf_counter() - t0
        if rc != 0:
            log.info("ordering %s exited with status %d", o, rc)
            return Timeout("nonzero-exit")
        if elapsed >= cfg.timeout_seconds:
            return Timeout("timeout")
        return elapsed
    finally:
        os.unlink(path)


def measure_all_orderings(p: PolySystem, problem_id: int, cfg: OracleConfig) -> TimingRecord:
    orderings = enumerate_orderings(p.n_vars)
    if cfg.kind == "surrogate":
        cache: dict = {}
        results = [surrogate_cost(p, o, cfg, cache) for o in orderings]
    elif cfg.jobs > 1:
        with ThreadPoolExecutor(max_workers=cfg.jobs) as pool:
            results = list(pool.map(lambda o: external_run(cfg, p, o), orderings))
    else:
        results = [external_run(cfg, p, o) for o in orderings]
    costs, flags = [], []
    for r in results:
        if isinstance(r, Timeout):
            costs.append(float(cfg.timeout_seconds))
            flags.append(True)
        else:
            costs.append(float(r))
            flags.append(False)
    return TimingRecord(problem_id, costs, flags)


def measure_dataset(problems: Sequence[PolySystem], cfg: OracleConfig) -> list[TimingRecord]:
    return [measure_all_orderings(p, i, cfg) for i, p in enumerate(problems)]


def label_best(t: TimingRecord) -> int:
    if not t.costs:
        raise ValueError("empty timing record")
    if all(t.timed_out):
        log.warning("problem %d timed out under every ordering; labelling ordering 0", t.problem_id)
        return 0
    best = 0
    for i, c in enumerate(t.costs):
        if c < t.costs[best]:
            best = i
    return best


# ---------------------------------------------------------------------------
# files

TIMINGS_HEADER = ["problem_id", "ordering_index", "cost_seconds", "timed_out"]


def write_timings(path, records: Sequence[TimingRecord]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TIMINGS_HEADER)
        for rec in sorted(records, key=lambda r: r.problem_id):
            for i, (c, t) in enumerate(zip(rec.costs, rec.timed_out)):
                w.writerow([rec.problem_id, i, f"{c:.6f}", int(t)])


def read_timings(path) -> list[TimingRecord]:
    by_id: dict[int, list] = {}
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != TIMINGS_HEADER:
            raise ValueError(f"{path}: unexpected header {header}")
        for lineno, row in enumerate(reader, 2):
            try:
                pid, idx, cost, flag = int(row[0]), int(row[1]), float(row[2]), row[3]
            except (ValueError, IndexError) as exc:
                raise ValueError(f"{path}:{lineno}: malformed row {row}") from exc
            if flag not in ("0", "1"):
                raise ValueError(f"{path}:{lineno}: timed_out must be 0 or 1")
            entries = by_id.setdefault(pid, [])
            if idx != len(entries):
                raise ValueError(f"{path}:{lineno}: ordering index {idx} out of sequence")
            entries.append((cost, flag == "1"))
    return [
        TimingRecord(pid, [c for c, _ in rows], [t for _, t in rows]) for pid, rows in sorted(by_id.items())
    ]


def write_problem_timings(directory, records: Sequence[TimingRecord]) -> None:
    """Optional per-problem files: one ``cost timed_out`` line per ordering."""
    os.makedirs(directory, exist_ok=True)
    for rec in records:
        with open(os.path.join(directory, f"problem_{rec.problem_id}.txt"), "w", encoding="utf-8") as fh:
            for c, t in zip(rec.costs, rec.timed_out):
                fh.write(f"{c:.6f} {int(t)}\n")


def write_labels(path, labels: Sequence[int]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for y in labels:
            fh.write(f"{int(y)}\n")


def read_labels(path) -> list[int]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                out.append(int(line))
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: not an ordering index: {line.strip()!r}") from exc
    return out
