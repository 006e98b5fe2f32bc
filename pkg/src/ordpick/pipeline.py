"""Stage orchestration for the train/test workflow.

Stages and the files they own (all inside ``out``)::

    1a  timings_train.csv                       cost of every ordering, training set
    1b  terms_train.txt, y_train.txt            parsed training problems, best labels
    1c  features_descriptions.txt, features_train_raw.txt,
        features_descriptions_final.txt, features_train.txt
    1d  hyperpar_<stamp>.txt, par_<stamp>.txt   CV search and fitted models
    2a  terms_test.txt
    2b  features_test.txt
    2c  y_<FAMILY>_<stamp>_test.txt             model predictions
    2d  y_brown_test.txt, y_sotd_test.txt       heuristic predictions
    2e  timings_test.csv, comparative_results_<stamp>.txt/.csv

Prediction wall times are collected in ``prediction_times.csv``; it is the only
artifact that is not byte-reproducible.  A stage reads only files written by
earlier stages (or the configured inputs), so any subset can be rerun.
"""

from __future__ import annotations

import csv
import glob
import logging
import os
import time
import zlib
from dataclasses import dataclass, field, fields
from typing import Callable, Sequence

import numpy as np

from . import featgen, oracle
from .mlcore import CVConfig, TrainingSet, load_models, predict, run_search, save_models, train
from .mlcore.models import canonical_family
from .polysys import GenConfig, generate_random_dataset, read_problems, write_problems
from .projection import Caps, brown_choose, sotd_choose
from .report import baseline_random, baseline_virtual, evaluate_solver, write_report

log = logging.getLogger(__name__)

STAGES = ("1a", "1b", "1c", "1d", "2a", "2b", "2c", "2d", "2e")
EXIT_OK, EXIT_CONFIG, EXIT_MISSING, EXIT_STAGE = 0, 2, 3, 4


class ConfigError(ValueError):
    pass


class MissingDependency(RuntimeError):
    def __init__(self, path: str, stage: str):
        super().__init__(f"missing {os.path.basename(path)}: run stage {stage} first")
        self.path = path
        self.stage = stage


class StageFailure(RuntimeError):
    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage {stage} failed: {cause}")
        self.stage = stage
        self.cause = cause


def derive_seed(master: int, label: str) -> int:
    """Independent 64-bit seed for one purpose (generation, cv, random-baseline, ...)."""
    ss = np.random.SeedSequence(entropy=master, spawn_key=(zlib.crc32(label.encode()),))
    return int(ss.generate_state(1, np.uint64)[0])


def make_stamp(t: float | None = None) -> str:
    return time.strftime("D%m_%d_T%H_%M", time.localtime(t))


# ---------------------------------------------------------------------------
# configuration


@dataclass
class PipelineConfig:
    train: str = ""
    test: str = ""
    out: str = "results"
    seed: int = 0
    oracle: oracle.OracleConfig = field(default_factory=oracle.OracleConfig)
    cv: CVConfig = field(default_factory=CVConfig)
    models: tuple = ("DT", "KNN", "MLP", "SVM")
    within: tuple = (0.0, 10.0, 20.0, 50.0)
    stages: tuple = STAGES
    stamp: str | None = None
    generate: int | None = None
    generator: GenConfig = field(default_factory=GenConfig)
    per_problem_timings: bool = False

    def __post_init__(self):
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be a 64-bit unsigned integer")
        try:
            self.models = tuple(canonical_family(m) for m in self.models)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        bad = [s for s in self.stages if s not in STAGES]
        if bad:
            raise ConfigError(f"unknown stages {bad}; expected a subset of {','.join(STAGES)}")
        if any(x < 0 for x in self.within):
            raise ConfigError("within values must be >= 0")
        if self.generate is not None and self.generate < 3:
            raise ConfigError("generate needs at least 3 problems")


def _split(value: str) -> list[str]:
    return [v.strip() for v in value.split(",") if v.strip()]


def _bool(value: str) -> bool:
    v = value.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {value!r}")


# config key -> (target, converter); targets are "<section>.<field>"
_KEYS: dict[str, tuple[str, Callable]] = {
    "train": ("train", str),
    "test": ("test", str),
    "out": ("out", str),
    "seed": ("seed", int),
    "stages": ("stages", lambda v: tuple(_split(v))),
    "models": ("models", lambda v: tuple(_split(v))),
    "within": ("within", lambda v: tuple(float(x) for x in _split(v))),
    "stamp": ("stamp", str),
    "generate": ("generate", int),
    "per_problem_timings": ("per_problem_timings", _bool),
    "oracle": ("oracle.kind", str),
    "timeout": ("oracle.timeout_seconds", float),
    "command": ("oracle.command_template", str),
    "surrogate_unit": ("oracle.surrogate_unit", float),
    "jobs": ("oracle.jobs", int),
    "max_polys": ("caps.max_polys", int),
    "max_tdeg": ("caps.max_tdeg", int),
    "cv": ("cv.objective", str),
    "folds": ("cv.folds", int),
    "candidates": ("cv.n_candidates", int),
}
for _f in fields(GenConfig):
    if _f.name not in ("seed",):
        _KEYS[f"gen_{_f.name}"] = (f"generator.{_f.name}", int if _f.type in ("int", int) else float)

PATH_KEYS = ("train", "test", "out")


def parse_config_text(text: str, source: str = "<config>") -> dict:
    """``key = value`` lines with ``#`` comments -> raw string mapping."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value'")
        key, value = (p.strip() for p in line.split("=", 1))
        if key not in _KEYS:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        out[key] = value
    return out


def build_config(values: dict, base_dir: str = ".") -> PipelineConfig:
    """Assemble a validated config from raw ``key -> str`` values (config file merged with CLI)."""
    top: dict = {}
    sections: dict = {"oracle": {}, "caps": {}, "cv": {}, "generator": {}}
    for key, value in values.items():
        if value is None:
            continue
        if key not in _KEYS:
            raise ConfigError(f"unknown key {key!r}")
        target, conv = _KEYS[key]
        try:
            v = conv(value) if isinstance(value, str) else value
        except ValueError as exc:
            raise ConfigError(f"bad value for {key}: {exc}") from exc
        if key in PATH_KEYS and v and not os.path.isabs(v):
            v = os.path.normpath(os.path.join(base_dir, v))
        if "." in target:
            sec, name = target.split(".")
            sections[sec][name] = v
        else:
            top[target] = v
    top.setdefault("out", os.path.normpath(os.path.join(base_dir, PipelineConfig.out)))
    try:
        seed = int(top.get("seed", 0))
        caps = Caps(**sections["caps"])
        top["oracle"] = oracle.OracleConfig(caps=caps, **sections["oracle"])
        top["cv"] = CVConfig(seed=derive_seed(seed, "cv") if 0 <= seed < 2**64 else 0, **sections["cv"])
        top["generator"] = GenConfig(seed=derive_seed(seed, "generation") if 0 <= seed < 2**64 else 0,
                                     **sections["generator"])
        return PipelineConfig(**top)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path: str, overrides: dict | None = None) -> PipelineConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    values = parse_config_text(text, path)
    values.update({k: v for k, v in (overrides or {}).items() if v is not None})
    return build_config(values, os.path.dirname(os.path.abspath(path)))


# ---------------------------------------------------------------------------
# file helpers


class _Run:
    def __init__(self, cfg: PipelineConfig):
        self.cfg = cfg
        self.out = cfg.out
        self.stamp = cfg.stamp

    def path(self, name: str) -> str:
        return os.path.join(self.out, name)

    def need(self, name: str, stage: str) -> str:
        p = self.path(name)
        if not os.path.exists(p):
            raise MissingDependency(p, stage)
        return p

    def need_input(self, path: str, what: str, stage: str) -> str:
        if not path:
            raise ConfigError(f"no {what} input configured (set '{what}' or use generate)")
        if not os.path.exists(path):
            if os.path.dirname(os.path.abspath(path)) == os.path.abspath(self.out):
                raise MissingDependency(path, stage)
            raise ConfigError(f"{what} input {path} does not exist")
        return path

    def model_stamp(self) -> str:
        """Stamp of the model file to consume: the configured one, else the newest on disk."""
        if self.stamp:
            self.need(f"par_{self.stamp}.txt", "1d")
            return self.stamp
        found = sorted(glob.glob(self.path("par_*.txt")), key=lambda p: (os.path.getmtime(p), p))
        if not found:
            raise MissingDependency(self.path("par_<stamp>.txt"), "1d")
        self.stamp = os.path.basename(found[-1])[len("par_"):-len(".txt")]
        return self.stamp

    def record_prediction_times(self, entries: dict) -> None:
        p = self.path("prediction_times.csv")
        current = read_prediction_times(p) if os.path.exists(p) else {}
        current.update(entries)
        with open(p, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["solver", "prediction_seconds"])
            for name in sorted(current):
                w.writerow([name, repr(float(current[name]))])


def read_prediction_times(path) -> dict:
    with open(path, encoding="utf-8", newline="") as fh:
        return {row["solver"]: float(row["prediction_seconds"]) for row in csv.DictReader(fh)}


def prediction_file(family: str, stamp: str) -> str:
    return f"y_{family}_{stamp}_test.txt"


def _train_input(run: _Run) -> str:
    if run.cfg.generate is not None:
        return run.need("terms_train.txt", "1a")
    return run.need_input(run.cfg.train, "train", "1a")


def _test_input(run: _Run) -> str:
    if run.cfg.generate is not None:
        return run.need("terms_test.txt", "1a")
    return run.need_input(run.cfg.test, "test", "2a")


# ---------------------------------------------------------------------------
# stages


def generate_inputs(run: _Run) -> None:
    """Synthetic data: two thirds train, one third test, from the generation stream."""
    count = run.cfg.generate
    problems = generate_random_dataset(run.cfg.generator, count)
    n_train = (2 * count) // 3
    write_problems(run.path("terms_train.txt"), problems[:n_train])
    write_problems(run.path("terms_test.txt"), problems[n_train:])
    log.info("generated %d train / %d test problems", n_train, count - n_train)


def stage_1a(run: _Run) -> None:
    if run.cfg.generate is not None:
        generate_inputs(run)
    problems = read_problems(_train_input(run))
    records = oracle.measure_dataset(problems, run.cfg.oracle)
    oracle.write_timings(run.path("timings_train.csv"), records)
    if run.cfg.per_problem_timings:
        oracle.write_problem_timings(run.path("timings_train"), records)


def stage_1b(run: _Run) -> None:
    problems = read_problems(_train_input(run))
    records = oracle.read_timings(run.need("timings_train.csv", "1a"))
    if len(records) != len(problems):
        raise ValueError(f"timings_train.csv covers {len(records)} problems, training set has {len(problems)}")
    write_problems(run.path("terms_train.txt"), problems)
    oracle.write_labels(run.path("y_train.txt"), [oracle.label_best(r) for r in records])


def stage_1c(run: _Run) -> None:
    problems = read_problems(run.need("terms_train.txt", "1b"))
    if not problems:
        raise ValueError("terms_train.txt is empty")
    raw = featgen.generate_raw_descriptors(problems[0].n_vars)
    m = featgen.evaluate_matrix(raw, problems)
    featgen.write_descriptors(run.path("features_descriptions.txt"), raw)
    featgen.write_matrix(run.path("features_train_raw.txt"), m)
    final = featgen.simplify_descriptors(raw, m)
    featgen.write_descriptors(run.path("features_descriptions_final.txt"), final)
    # re-evaluated from the written descriptions so hand-edited files behave the same
    final = featgen.read_descriptors(run.path("features_descriptions_final.txt"), problems[0].n_vars)
    featgen.write_matrix(run.path("features_train.txt"), featgen.evaluate_matrix(final, problems))


def _training_set(run: _Run) -> TrainingSet:
    n_cols = len(featgen.read_descriptors(run.need("features_descriptions_final.txt", "1c")))
    X = featgen.read_matrix(run.need("features_train.txt", "1c"), n_cols)
    y = oracle.read_labels(run.need("y_train.txt", "1b"))
    T = oracle.read_timings(run.need("timings_train.csv", "1a"))
    if X.shape[0] == 0 and n_cols == 0:
        X = np.zeros((len(y), 0))
    if not len(X) == len(y) == len(T):
        raise ValueError(f"training files disagree: {len(X)} feature rows, {len(y)} labels, {len(T)} timings")
    return TrainingSet(X, y, T)


def stage_1d(run: _Run) -> None:
    data = _training_set(run)
    if run.stamp is None:
        run.stamp = make_stamp()
    cv = run.cfg.cv
    lines, models = [], {}
    train_seed = derive_seed(run.cfg.seed, "train")
    for family in run.cfg.models:
        res = run_search(family, data, cv)
        lines.append(
            f"{family} {cv.objective} {cv.folds} {cv.n_candidates} {cv.seed} -> chosen: "
            f"{res.best.describe()} cv_score={res.cv_score!r}"
        )
        models[family] = train(res.best, data.X, data.y, seed=train_seed)
        log.info("%s", lines[-1])
    with open(run.path(f"hyperpar_{run.stamp}.txt"), "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
    save_models(run.path(f"par_{run.stamp}.txt"), models)


def stage_2a(run: _Run) -> None:
    problems = read_problems(_test_input(run))
    write_problems(run.path("terms_test.txt"), problems)


def stage_2b(run: _Run) -> None:
    problems = read_problems(run.need("terms_test.txt", "2a"))
    n_vars = problems[0].n_vars if problems else None
    final = featgen.read_descriptors(run.need("features_descriptions_final.txt", "1c"), n_vars)
    featgen.write_matrix(run.path("features_test.txt"), featgen.evaluate_matrix(final, problems))


def _test_features(run: _Run) -> np.ndarray:
    n_cols = len(featgen.read_descriptors(run.need("features_descriptions_final.txt", "1c")))
    n_rows = len(read_problems(run.need("terms_test.txt", "2a")))
    X = featgen.read_matrix(run.need("features_test.txt", "2b"), n_cols)
    if n_cols == 0:
        X = np.zeros((n_rows, 0))
    if len(X) != n_rows:
        raise ValueError(f"features_test.txt has {len(X)} rows for {n_rows} test problems")
    return X


def stage_2c(run: _Run) -> None:
    stamp = run.model_stamp()
    models = load_models(run.need(f"par_{stamp}.txt", "1d"))
    X = _test_features(run)
    times = {}
    for family in run.cfg.models:
        if family not in models:
            raise ValueError(f"par_{stamp}.txt holds no {family} model")
        t0 = time.perf_counter()
        pred = predict(models[family], X)
        times[family] = time.perf_counter() - t0
        oracle.write_labels(run.path(prediction_file(family, stamp)), pred.tolist())
    run.record_prediction_times(times)


def stage_2d(run: _Run) -> None:
    problems = read_problems(run.need("terms_test.txt", "2a"))
    caps = run.cfg.oracle.caps
    brown = [brown_choose(s) for s in problems]
    sotd = [sotd_choose(s, caps) for s in problems]
    oracle.write_labels(run.path("y_brown_test.txt"), [c.ordering.index for c in brown])
    oracle.write_labels(run.path("y_sotd_test.txt"), [c.ordering.index for c in sotd])
    run.record_prediction_times({
        "Brown": sum(c.prediction_seconds for c in brown),
        "sotd": sum(c.prediction_seconds for c in sotd),
    })


def stage_2e(run: _Run) -> None:
    problems = read_problems(run.need("terms_test.txt", "2a"))
    records = oracle.measure_dataset(problems, run.cfg.oracle)
    oracle.write_timings(run.path("timings_test.csv"), records)
    if run.cfg.per_problem_timings:
        oracle.write_problem_timings(run.path("timings_test"), records)
    T = oracle.read_timings(run.path("timings_test.csv"))  # evaluate on the stored (rounded) costs
    labels = [oracle.label_best(r) for r in T]
    stamp = run.model_stamp() if run.cfg.models else (run.stamp or make_stamp())
    times = read_prediction_times(run.need("prediction_times.csv", "2d"))
    within = run.cfg.within

    preds = {}
    for family in run.cfg.models:
        preds[family] = oracle.read_labels(run.need(prediction_file(family, stamp), "2c"))
    preds["Brown"] = oracle.read_labels(run.need("y_brown_test.txt", "2d"))
    preds["sotd"] = oracle.read_labels(run.need("y_sotd_test.txt", "2d"))

    results = {}
    for name, pred in preds.items():
        if name not in times:
            raise MissingDependency(run.path("prediction_times.csv"), "2c" if name in run.cfg.models else "2d")
        results[name] = evaluate_solver(name, pred, T, labels, times[name], within)
    t0 = time.perf_counter()
    rand = baseline_random(T, derive_seed(run.cfg.seed, "random-baseline"))
    results["rand"] = evaluate_solver("rand", rand, T, labels, time.perf_counter() - t0, within)
    results["VB"] = evaluate_solver("VB", baseline_virtual(T, "best"), T, labels, 0.0, within)
    results["VW"] = evaluate_solver("VW", baseline_virtual(T, "worst"), T, labels, 0.0, within)
    write_report(
        run.path(f"comparative_results_{stamp}.txt"),
        run.path(f"comparative_results_{stamp}.csv"),
        results,
        within,
        len(T),
    )


STAGE_FUNCS = {
    "1a": stage_1a, "1b": stage_1b, "1c": stage_1c, "1d": stage_1d,
    "2a": stage_2a, "2b": stage_2b, "2c": stage_2c, "2d": stage_2d, "2e": stage_2e,
}


def run(cfg: PipelineConfig, stages: Sequence[str] | None = None) -> str:
    """Execute the requested stages in dependency order; returns the stamp used."""
    wanted = set(cfg.stages if stages is None else stages)
    bad = wanted - set(STAGES)
    if bad:
        raise ConfigError(f"unknown stages {sorted(bad)}")
    os.makedirs(cfg.out, exist_ok=True)
    r = _Run(cfg)
    for stage in STAGES:
        if stage not in wanted:
            continue
        t0 = time.perf_counter()
        log.info("stage %s ...", stage)
        try:
            STAGE_FUNCS[stage](r)
        except (MissingDependency, ConfigError):
            raise
        except Exception as exc:  # noqa: BLE001 - reported with the stage id
            raise StageFailure(stage, exc) from exc
        log.info("stage %s done in %.2fs", stage, time.perf_counter() - t0)
    return r.stamp or ""
