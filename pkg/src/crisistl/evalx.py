"""Metrics, repeated-run experiments and report files for the scenario grid."""

from __future__ import annotations

import csv
import io
import json
from collections import defaultdict
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .corpus import Corpus, LabelClass
from .embed import REP_DIMS, Representation, Resources, build_representation
from .forest import ForestParams, fit_forest
from .lingfeat import SCHEMA_VERSION
from .scenario import (
    EventPartition,
    ScenarioDataset,
    ScenarioKind,
    ScenarioSpec,
    build_scenario,
    derive_seed,
    partition_events,
)

METRICS = ("f1_positive", "f1_macro", "f1_weighted")


class EvalError(ValueError):
    pass


class ExperimentError(RuntimeError):
    """A stage failed for one (spec, representation, run) combination."""

    def __init__(self, spec: ScenarioSpec, rep: str, stage: str, run: int | None, cause: Exception):
        self.spec, self.rep, self.stage, self.run = spec, rep, stage, run
        where = f"spec={spec.label} rep={rep} stage={stage}"
        if run is not None:
            where += f" run={run}"
        super().__init__(f"[{where}] {type(cause).__name__}: {cause}")


class F1Mode(str, Enum):
    POSITIVE = "Positive"
    MACRO = "Macro"
    WEIGHTED = "Weighted"


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    def to_dict(self) -> dict:
        return {"tp": self.tp, "fp": self.fp, "tn": self.tn, "fn": self.fn}


def _as_int_labels(labels) -> np.ndarray:
    return np.array([lab.as_int if isinstance(lab, LabelClass) else int(lab) for lab in labels], dtype=np.int64)


def confusion_counts(predicted, actual) -> ConfusionCounts:
    p, a = _as_int_labels(predicted), _as_int_labels(actual)
    if p.shape != a.shape:
        raise EvalError(f"length mismatch: {p.size} predictions vs {a.size} labels")
    if p.size == 0:
        raise EvalError("no labels to evaluate")
    return ConfusionCounts(
        int(((p == 1) & (a == 1)).sum()),
        int(((p == 1) & (a == 0)).sum()),
        int(((p == 0) & (a == 0)).sum()),
        int(((p == 0) & (a == 1)).sum()),
    )


def _f1(tp: int, fp: int, fn: int) -> float:
    denom = 2 * tp + fp + fn
    return 2 * tp / denom if denom else 0.0


def f1_score(c: ConfusionCounts, mode: F1Mode | str = F1Mode.POSITIVE) -> float:
    mode = F1Mode(mode)
    pos = _f1(c.tp, c.fp, c.fn)
    if mode is F1Mode.POSITIVE:
        return pos
    neg = _f1(c.tn, c.fn, c.fp)
    if mode is F1Mode.MACRO:
        return (pos + neg) / 2
    support_pos, support_neg = c.tp + c.fn, c.tn + c.fp
    total = support_pos + support_neg
    if total == 0:
        raise EvalError("weighted F1 needs at least one actual instance")
    return (pos * support_pos + neg * support_neg) / total


@dataclass(frozen=True)
class RunResult:
    seed: int
    counts: ConfusionCounts
    f1_positive: float
    f1_macro: float
    f1_weighted: float

    @classmethod
    def from_counts(cls, seed: int, counts: ConfusionCounts) -> "RunResult":
        return cls(
            seed,
            counts,
            f1_score(counts, F1Mode.POSITIVE),
            f1_score(counts, F1Mode.MACRO),
            f1_score(counts, F1Mode.WEIGHTED),
        )

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "counts": self.counts.to_dict(),
            **{m: getattr(self, m) for m in METRICS},
        }


def average_runs(runs: Sequence[RunResult]) -> dict[str, float]:
    if not runs:
        raise EvalError("no runs to average")
    return {m: sum(getattr(r, m) for r in runs) / len(runs) for m in METRICS}


@dataclass(frozen=True)
class EvalReport:
    spec: ScenarioSpec
    representation: Representation
    runs: tuple[RunResult, ...]
    averaged: dict = field(compare=True)
    test_digest: str = ""
    n_train: int = 0
    n_test: int = 0
    n_augmented: int = 0
    shortfall: int = 0

    @classmethod
    def from_runs(cls, spec, rep, runs, **extra) -> "EvalReport":
        return cls(spec, Representation.parse(rep), tuple(runs), average_runs(runs), **extra)

    @property
    def key(self) -> tuple[ScenarioKind, str, str, Representation]:
        return (self.spec.kind, self.spec.target_language, self.spec.target_domain, self.representation)

    def to_dict(self) -> dict:
        return {
            "spec": self.spec.to_dict(),
            "representation": self.representation.value,
            "runs": [r.to_dict() for r in self.runs],
            "averaged": dict(self.averaged),
            "test_digest": self.test_digest,
            "n_train": self.n_train,
            "n_test": self.n_test,
            "n_augmented": self.n_augmented,
            "shortfall": self.shortfall,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EvalReport":
        runs = tuple(
            RunResult(r["seed"], ConfusionCounts(**r["counts"]), r["f1_positive"], r["f1_macro"], r["f1_weighted"])
            for r in d["runs"]
        )
        return cls(
            ScenarioSpec.from_dict(d["spec"]),
            Representation.parse(d["representation"]),
            runs,
            dict(d["averaged"]),
            d.get("test_digest", ""),
            d.get("n_train", 0),
            d.get("n_test", 0),
            d.get("n_augmented", 0),
            d.get("shortfall", 0),
        )


# --- experiments ------------------------------------------------------------

class FeatureCache:
    """Per-representation feature rows keyed by message id, shared across runs and scenarios."""

    def __init__(self):
        self._rows: dict[Representation, dict[str, np.ndarray]] = defaultdict(dict)

    def matrix(self, messages, rep: Representation, resources: Resources) -> np.ndarray:
        store = self._rows[rep]
        todo, seen = [], set()
        for m in messages:
            if m.id not in store and m.id not in seen:
                todo.append(m)
                seen.add(m.id)
        if todo:
            fm = build_representation(todo, rep, resources)
            for rid, row in zip(fm.row_ids, fm.values):
                store[rid] = row
        if not messages:
            return np.zeros((0, REP_DIMS[rep]))
        return np.vstack([store[m.id] for m in messages])


def run_seed(master_seed: int, run: int) -> int:
    return derive_seed(master_seed, "run", run)


def evaluate_scenario(
    corpus: Corpus,
    ds: ScenarioDataset,
    rep: Representation,
    resources: Resources,
    params: ForestParams,
    seed: int,
    cache: FeatureCache,
    workers: int = 1,
) -> RunResult:
    train_msgs = ds.messages(corpus, [i for i, _ in ds.train])
    test_msgs = ds.messages(corpus, [i for i, _ in ds.test])
    X_train = cache.matrix(train_msgs, rep, resources)
    X_test = cache.matrix(test_msgs, rep, resources)
    y_train = np.array([label.as_int for _, label in ds.train])
    y_test = np.array([label.as_int for _, label in ds.test])
    p = ForestParams(**{**params.to_dict(), "seed": seed})
    model = fit_forest(X_train, y_train, p, rep.value, SCHEMA_VERSION, workers=workers)
    return RunResult.from_counts(seed, confusion_counts(model.predict(X_test), y_test))


def run_experiment(
    corpus: Corpus,
    spec: ScenarioSpec,
    rep: Representation | str,
    resources: Resources,
    repeats: int = 5,
    master_seed: int | None = None,
    params: ForestParams = ForestParams(),
    target_ratio: float = 0.5,
    partition: EventPartition | None = None,
    cache: FeatureCache | None = None,
    workers: int = 1,
) -> EvalReport:
    """Run ``repeats`` seeded repetitions; balancing and the forest are reseeded per run.

    The augmented test set is built once and stays fixed across runs.
    """
    rep = Representation.parse(rep)
    if repeats < 1:
        raise EvalError("repeats must be >= 1")
    master = spec.seed if master_seed is None else master_seed
    cache = FeatureCache() if cache is None else cache
    try:
        part = partition_events(corpus) if partition is None else partition
    except Exception as exc:
        raise ExperimentError(spec, rep.value, "scenario", None, exc) from exc
    runs, ds = [], None
    for r in range(repeats):
        seed_r = run_seed(master, r)
        try:
            ds = build_scenario(corpus, spec, resources.translator, target_ratio, balance_seed=seed_r, partition=part)
        except Exception as exc:
            raise ExperimentError(spec, rep.value, "scenario", r, exc) from exc
        try:
            runs.append(evaluate_scenario(corpus, ds, rep, resources, params, seed_r, cache, workers))
        except Exception as exc:
            raise ExperimentError(spec, rep.value, "features/train/eval", r, exc) from exc
    return EvalReport.from_runs(
        spec,
        rep,
        runs,
        test_digest=ds.test_digest(),
        n_train=len(ds.train),
        n_test=len(ds.test),
        n_augmented=len(ds.augmentation_log),
        shortfall=ds.shortfall,
    )


def evaluate_manifest(
    corpus: Corpus,
    ds: ScenarioDataset,
    rep: Representation | str,
    resources: Resources,
    repeats: int = 5,
    master_seed: int = 0,
    params: ForestParams = ForestParams(),
    cache: FeatureCache | None = None,
    workers: int = 1,
) -> EvalReport:
    """Repeated runs on a fixed (e.g. published) split; only the forest is reseeded."""
    rep = Representation.parse(rep)
    if repeats < 1:
        raise EvalError("repeats must be >= 1")
    cache = FeatureCache() if cache is None else cache
    runs = []
    for r in range(repeats):
        seed_r = run_seed(master_seed, r)
        try:
            runs.append(evaluate_scenario(corpus, ds, rep, resources, params, seed_r, cache, workers))
        except Exception as exc:
            raise ExperimentError(ds.spec, rep.value, "features/train/eval", r, exc) from exc
    return EvalReport.from_runs(
        ds.spec, rep, runs, test_digest=ds.test_digest(), n_train=len(ds.train), n_test=len(ds.test),
        n_augmented=len(ds.augmentation_log), shortfall=ds.shortfall,
    )


# --- aggregation --------------------------------------------------------------

CellKey = tuple[ScenarioKind, str, str, Representation]


@dataclass
class RunMatrix:
    cells: dict[CellKey, EvalReport]

    def kinds(self) -> list[ScenarioKind]:
        present = {k[0] for k in self.cells}
        return [k for k in ScenarioKind if k in present]

    def representations(self) -> list[Representation]:
        present = {k[3] for k in self.cells}
        return [r for r in Representation if r in present]

    def targets(self) -> list[tuple[str, str]]:
        return sorted({(k[1], k[2]) for k in self.cells})

    def scenario_average(self, kind: ScenarioKind, rep: Representation, metric: str = "f1_positive") -> float | None:
        """Unweighted mean over targets."""
        vals = [c.averaged[metric] for k, c in sorted(self.cells.items(), key=_cell_sort) if k[0] == kind and k[3] == rep]
        return sum(vals) / len(vals) if vals else None


def _cell_sort(item):
    (kind, lang, dom, rep), _ = item
    return (list(ScenarioKind).index(kind), lang, dom, list(Representation).index(rep))


def aggregate_matrix(reports: Iterable[EvalReport]) -> RunMatrix:
    cells: dict[CellKey, EvalReport] = {}
    digests: dict[tuple[str, str], str] = {}
    for rep in reports:
        if rep.key in cells:
            k = rep.key
            raise EvalError(f"duplicate cell ({k[0].value}, {k[1]}/{k[2]}, {k[3].value})")
        cells[rep.key] = rep
        if rep.test_digest:
            target = (rep.spec.target_language, rep.spec.target_domain)
            seen = digests.setdefault(target, rep.test_digest)
            if seen != rep.test_digest:
                raise EvalError(f"cells for target {target[0]}/{target[1]} were evaluated on different test sets")
    return RunMatrix(cells)


# --- report emission ----------------------------------------------------------

class ReportFormat(str, Enum):
    DELIMITED = "Delimited"
    STRUCTURED = "Structured"
    PLOT_DATA = "PlotData"


def _fmt(v: float | None) -> str:
    return "" if v is None else f"{v:.6f}"


def _csv_text(rows: list[list[str]]) -> str:
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerows(rows)
    return buf.getvalue()


def grid_rows(matrix: RunMatrix, metric: str = "f1_positive") -> list[list[str]]:
    reps = matrix.representations()
    rows = [["scenario", *[r.value for r in reps]]]
    for kind in matrix.kinds():
        rows.append([kind.value, *[_fmt(matrix.scenario_average(kind, r, metric)) for r in reps]])
    return rows


def emit_report(
    matrix: RunMatrix,
    out_dir: str | Path,
    formats: Sequence[ReportFormat | str] = tuple(ReportFormat),
) -> list[Path]:
    """Write report files and return their paths. Content is fully deterministic."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    def write(name: str, text: str) -> None:
        p = out / name
        p.write_text(text, encoding="utf-8")
        written.append(p)

    cells = sorted(matrix.cells.items(), key=_cell_sort)
    for fmt in (ReportFormat(f) for f in formats):
        if fmt is ReportFormat.DELIMITED:
            for metric in METRICS:
                write(f"grid_{metric}.csv", _csv_text(grid_rows(matrix, metric)))
            rows = [["scenario", "target_language", "target_domain", "representation", "tp_rate", "fp_rate", "tn_rate", "fn_rate"]]
            for (kind, lang, dom, rep), c in cells:
                total = sum(r.counts.total for r in c.runs)
                rates = [sum(getattr(r.counts, f) for r in c.runs) / total for f in ("tp", "fp", "tn", "fn")]
                rows.append([kind.value, lang, dom, rep.value, *[_fmt(x) for x in rates]])
            write("confusion_rates.csv", _csv_text(rows))
        elif fmt is ReportFormat.STRUCTURED:
            payload = {
                "cells": [c.to_dict() for _, c in cells],
                "scenario_averages": {
                    metric: {
                        kind.value: {r.value: matrix.scenario_average(kind, r, metric) for r in matrix.representations()}
                        for kind in matrix.kinds()
                    }
                    for metric in METRICS
                },
            }
            write("report.json", json.dumps(payload, indent=1, sort_keys=True) + "\n")
        else:
            for lang in sorted({k[1] for k in matrix.cells}):
                rows = [["scenario", "target_domain", "representation", *METRICS]]
                for (kind, tl, dom, rep), c in cells:
                    if tl == lang:
                        rows.append([kind.value, dom, rep.value, *[_fmt(c.averaged[m]) for m in METRICS]])
                write(f"plot_{lang}.csv", _csv_text(rows))
    return written


def load_reports(path: str | Path) -> list[EvalReport]:
    """Read the ``cells`` of a structured report (or a JSON list of cells)."""
    d = json.loads(Path(path).read_text(encoding="utf-8"))
    cells = d["cells"] if isinstance(d, dict) else d
    return [EvalReport.from_dict(c) for c in cells]
