"""Command-line driver: unify, detect-lang, scenario, features, train, eval,
run-matrix, report, validate and synth.

Settings come from a JSON config (``--config``); command-line flags override
config fields, which override built-in defaults. Relative paths in a config
resolve against the config file's directory.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .corpus import load_corpus, save_corpus, validate_corpus
from .embed import (
    CONTEXTUAL,
    REP_DIMS,
    FeatureMatrix,
    Representation,
    Resources,
    build_representation,
    load_contextual_cache,
    load_word_vectors,
)
from .evalx import (
    EvalReport,
    FeatureCache,
    RunResult,
    aggregate_matrix,
    confusion_counts,
    emit_report,
    load_reports,
    run_experiment,
)
from .forest import ForestParams, fit_forest, load_model, save_model
from .langid import NgramDetector, fill_languages
from .lingfeat import SCHEMA_VERSION
from .scenario import (
    ScenarioKind,
    ScenarioSpec,
    build_scenario,
    export_manifest,
    import_manifest,
    partition_events,
)
from .translate import CachedTranslator, HttpTranslator, TranslationCache
from .unify import (
    annotate_events,
    apply_label_mapping,
    default_label_mapping,
    load_label_mapping,
    load_taxonomy,
    corpus_from_rows,
    merge_corpora,
    read_raw_rows,
)

log = logging.getLogger("crisistl")


class ConfigError(ValueError):
    def __init__(self, problems: list[str]):
        self.problems = problems
        super().__init__("invalid configuration:\n" + "\n".join(f"  - {p}" for p in problems))


@dataclass
class RunConfig:
    corpus: Path | None = None
    mapping: Path | None = None
    taxonomy: Path | None = None
    glove: Path | None = None
    muse: dict[str, Path] = field(default_factory=dict)
    contextual: dict[str, Path] = field(default_factory=dict)
    translation_cache: Path | None = None
    live_translation: bool = False
    kinds: list[str] = field(default_factory=lambda: [k.cli_name for k in ScenarioKind])
    targets: list[tuple[str, str]] = field(default_factory=list)
    representations: list[str] = field(default_factory=lambda: [r.value for r in Representation])
    repeats: int = 5
    seed: int = 0
    n_trees: int = 100
    target_ratio: float = 0.5
    workers: int = 1
    out: Path = Path("out")

    def validate(self, need_corpus: bool = True) -> None:
        problems = []
        if need_corpus and self.corpus is None:
            problems.append("no corpus given (--corpus or config 'corpus')")
        for name in ("corpus", "mapping", "taxonomy", "glove", "translation_cache"):
            p = getattr(self, name)
            if p is not None and not p.exists():
                problems.append(f"{name}: path does not exist: {p}")
        for lang, p in self.muse.items():
            if not p.exists():
                problems.append(f"muse[{lang}]: path does not exist: {p}")
        for rep, p in self.contextual.items():
            if not p.exists():
                problems.append(f"contextual[{rep}]: path does not exist: {p}")
        if self.repeats < 1:
            problems.append(f"repeats must be >= 1, got {self.repeats}")
        if self.n_trees < 1:
            problems.append(f"n_trees must be >= 1, got {self.n_trees}")
        for k in self.kinds:
            try:
                ScenarioKind.parse(k)
            except ValueError as exc:
                problems.append(str(exc))
        for r in self.representations:
            try:
                Representation.parse(r)
            except ValueError as exc:
                problems.append(str(exc))
        if problems:
            raise ConfigError(problems)


def load_config(path: str | Path | None) -> RunConfig:
    cfg = RunConfig()
    if path is None:
        return cfg
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError([f"cannot read config {path}: {exc}"]) from None
    base = path.parent

    def p(v):
        return None if v is None else (base / v)

    res = raw.get("resources", {})
    grid = raw.get("grid", {})
    cfg.corpus = p(raw.get("corpus"))
    cfg.mapping = p(raw.get("mapping"))
    cfg.taxonomy = p(raw.get("taxonomy"))
    cfg.glove = p(res.get("glove"))
    cfg.muse = {k: base / v for k, v in res.get("muse", {}).items()}
    cfg.contextual = {k: base / v for k, v in res.get("contextual", {}).items()}
    cfg.translation_cache = p(res.get("translation_cache"))
    cfg.live_translation = bool(res.get("live_translation", False))
    if "kinds" in grid:
        cfg.kinds = list(grid["kinds"])
    cfg.targets = [tuple(t) for t in grid.get("targets", [])]
    if "representations" in grid:
        cfg.representations = list(grid["representations"])
    for key in ("repeats", "seed", "n_trees", "workers"):
        if key in raw:
            setattr(cfg, key, int(raw[key]))
    if "target_ratio" in raw:
        cfg.target_ratio = float(raw["target_ratio"])
    if "out" in raw:
        cfg.out = base / raw["out"]
    unknown = set(raw) - {"corpus", "mapping", "taxonomy", "resources", "grid", "repeats", "seed",
                          "n_trees", "workers", "target_ratio", "out"}
    if unknown:
        raise ConfigError([f"unknown config field(s): {', '.join(sorted(unknown))}"])
    return cfg


def apply_flags(cfg: RunConfig, args: argparse.Namespace) -> RunConfig:
    """Flags win over config values."""
    for name in ("corpus", "mapping", "taxonomy", "out"):
        v = getattr(args, name, None)
        if v is not None:
            setattr(cfg, name, Path(v))
    for name in ("repeats", "seed", "workers", "n_trees"):
        v = getattr(args, name, None)
        if v is not None:
            setattr(cfg, name, v)
    if getattr(args, "kind", None):
        cfg.kinds = [args.kind]
    if getattr(args, "rep", None):
        cfg.representations = [args.rep]
    tl, td = getattr(args, "target_lang", None), getattr(args, "target_domain", None)
    if tl or td:
        if not (tl and td):
            raise ConfigError(["--target-lang and --target-domain must be given together"])
        cfg.targets = [(tl, td)]
    return cfg


def load_resources(cfg: RunConfig, reps: Sequence[Representation]) -> Resources:
    """Load only what the requested representations need."""
    res = Resources()
    if cfg.translation_cache is not None or cfg.live_translation:
        backend = HttpTranslator() if cfg.live_translation else None
        res.translator = CachedTranslator(backend, TranslationCache(cfg.translation_cache))
    if Representation.MT_GLOVE in reps and cfg.glove is not None:
        res.glove = load_word_vectors(cfg.glove, 100)
    if Representation.MUSE in reps or Representation.MUSE_LF in reps:
        res.muse = {lang: load_word_vectors(p, 300, f"muse-{lang}") for lang, p in cfg.muse.items()}
    for rep in reps:
        if rep in CONTEXTUAL and rep.value in cfg.contextual:
            res.caches[rep] = load_contextual_cache(cfg.contextual[rep.value], 768)
    return res


class Stage:
    """Tracks the (spec, representation, stage) triple for diagnostics."""

    def __init__(self):
        self.spec = "-"
        self.rep = "-"
        self.stage = "-"

    def set(self, stage: str | None = None, spec: str | None = None, rep: str | None = None) -> None:
        if stage is not None:
            self.stage = stage
        if spec is not None:
            self.spec = spec
        if rep is not None:
            self.rep = rep

    def __str__(self) -> str:
        return f"spec={self.spec} rep={self.rep} stage={self.stage}"


def _spec_from(cfg: RunConfig, args) -> ScenarioSpec:
    if not cfg.targets or len(cfg.kinds) != 1:
        raise ConfigError(["a single --kind with --target-lang/--target-domain is required"])
    tl, td = cfg.targets[0]
    return ScenarioSpec(ScenarioKind.parse(cfg.kinds[0]), tl, td, getattr(args, "source_lang", "en"), cfg.seed)


def _manifest_name(spec: ScenarioSpec) -> str:
    return f"{spec.kind.cli_name}__{spec.target_language}__{spec.target_domain}.json"


# --- subcommands -------------------------------------------------------------

def cmd_unify(args, cfg: RunConfig, st: Stage) -> int:
    st.set("unify")
    mapping = load_label_mapping(cfg.mapping, args.overrides) if cfg.mapping else default_label_mapping()
    problems = mapping.check()
    if problems:
        raise ConfigError(problems)
    if cfg.taxonomy is None:
        raise ConfigError(["unify needs --taxonomy"])
    taxonomy = load_taxonomy(cfg.taxonomy)
    parts, unmapped = [], []
    for src in args.sources:
        result = apply_label_mapping(read_raw_rows(src), mapping)
        unmapped += [f"{src}: {ds}/{label!r}" for ds, label in result.unmapped]
        print(f"{src}: kept {len(result.messages)}, discarded {result.discarded}, unmapped labels {len(result.unmapped)}")
        parts.append(corpus_from_rows(result, taxonomy))
    corpus = annotate_events(merge_corpora(parts), taxonomy)
    out = Path(args.out_file)
    save_corpus(corpus, out)
    print(f"wrote {len(corpus)} messages, {len(corpus.events)} events to {out}")
    if unmapped:
        for u in unmapped:
            print(f"unmapped label: {u}", file=sys.stderr)
        return 1
    return 0


def cmd_detect_lang(args, cfg: RunConfig, st: Stage) -> int:
    st.set("detect-lang")
    corpus = load_corpus(cfg.corpus, strict=False)
    detector = NgramDetector.from_directory(args.profiles) if args.profiles else NgramDetector.default()
    corpus, failed = fill_languages(corpus, detector, overwrite=args.overwrite)
    save_corpus(corpus, Path(args.out_file))
    print(f"languages filled; {len(failed)} message(s) too short to classify")
    for mid in failed:
        print(f"undetected: {mid}", file=sys.stderr)
    return 0


def cmd_validate(args, cfg: RunConfig, st: Stage) -> int:
    st.set("validate")
    corpus = load_corpus(cfg.corpus, strict=False)
    problems = validate_corpus(corpus)
    for v in problems:
        print(f"{v.record_id}\t{v.rule}\t{v.detail}")
    if args.manifest:
        st.set("validate-manifest")
        for m in args.manifest:
            ds = import_manifest(m, corpus)
            overlap = ds.train_events & ds.test_events
            shared = {i for i, _ in ds.train} & {i for i, _ in ds.test}
            if overlap or shared:
                print(f"{m}: leakage: {len(overlap)} shared event(s), {len(shared)} shared message(s)")
                problems.append(None)
            else:
                print(f"{m}: ok ({len(ds.train)} train, {len(ds.test)} test)")
    print(f"{len(corpus)} messages, {len(corpus.events)} events, {len(problems)} problem(s)")
    return 1 if problems else 0


def cmd_scenario(args, cfg: RunConfig, st: Stage) -> int:
    st.set("load")
    corpus = load_corpus(cfg.corpus)
    res = load_resources(cfg, [])
    part = partition_events(corpus)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    specs = [_spec_from(cfg, args)] if args.kind else _grid_specs(cfg)
    h = corpus.content_hash()
    for spec in specs:
        st.set("scenario", spec=spec.label)
        ds = build_scenario(corpus, spec, res.translator, cfg.target_ratio, partition=part)
        path = out / _manifest_name(spec)
        export_manifest(ds, path, h)
        print(f"{path}: train {len(ds.train)}, test {len(ds.test)}, added negatives {len(ds.augmentation_log)}, shortfall {ds.shortfall}")
    return 0


def _grid_specs(cfg: RunConfig) -> list[ScenarioSpec]:
    if not cfg.targets:
        raise ConfigError(["no targets: give --target-lang/--target-domain or a config grid"])
    specs = []
    for k in cfg.kinds:
        kind = ScenarioKind.parse(k)
        for tl, td in cfg.targets:
            if kind.cross_lingual and tl == "en":
                continue
            specs.append(ScenarioSpec(kind, tl, td, "en", cfg.seed))
    return specs


def cmd_features(args, cfg: RunConfig, st: Stage) -> int:
    st.set("load")
    corpus = load_corpus(cfg.corpus)
    ds = import_manifest(args.manifest, corpus)
    rep = Representation.parse(args.rep)
    st.set("features", spec=ds.spec.label, rep=rep.value)
    res = load_resources(cfg, [rep])
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    for part in ("train", "test"):
        ids = [i for i, _ in getattr(ds, part)]
        fm = build_representation(ds.messages(corpus, ids), rep, res)
        fm.to_csv(out / f"{part}.{rep.value}.csv")
        print(f"{out / f'{part}.{rep.value}.csv'}: {fm.shape[0]} x {fm.shape[1]}")
    return 0


def _labels(items) -> np.ndarray:
    return np.array([label.as_int for _, label in items], dtype=np.int64)


def _load_split(args, corpus_cfg: RunConfig, part: str):
    corpus = load_corpus(corpus_cfg.corpus)
    ds = import_manifest(args.manifest, corpus)
    rep = Representation.parse(args.rep)
    fm = FeatureMatrix.from_csv(Path(args.features) / f"{part}.{rep.value}.csv", rep)
    items = getattr(ds, part)
    if list(fm.row_ids) != [i for i, _ in items]:
        raise ValueError(f"{part} feature rows do not match the manifest order")
    if fm.shape[1] != REP_DIMS[rep]:
        raise ValueError(f"{rep.value} matrix has width {fm.shape[1]}, expected {REP_DIMS[rep]}")
    return ds, rep, fm, _labels(items)


def cmd_train(args, cfg: RunConfig, st: Stage) -> int:
    st.set("load", rep=args.rep)
    ds, rep, fm, y = _load_split(args, cfg, "train")
    st.set("train", spec=ds.spec.label)
    params = ForestParams(n_trees=cfg.n_trees, seed=cfg.seed)
    model = fit_forest(fm.values, y, params, rep.value, SCHEMA_VERSION, workers=cfg.workers)
    save_model(model, args.model)
    print(f"wrote {args.model} ({len(model.trees)} trees, {model.feature_count} features)")
    return 0


def cmd_eval(args, cfg: RunConfig, st: Stage) -> int:
    st.set("load", rep=args.rep)
    ds, rep, fm, y = _load_split(args, cfg, "test")
    st.set("eval", spec=ds.spec.label)
    model = load_model(args.model)
    if model.representation not in (None, rep.value):
        raise ValueError(f"model was trained on {model.representation}, features are {rep.value}")
    run = RunResult.from_counts(model.params.seed, confusion_counts(model.predict(fm.values), y))
    report = EvalReport.from_runs(ds.spec, rep, [run], test_digest=ds.test_digest(), n_train=len(ds.train),
                                  n_test=len(ds.test), n_augmented=len(ds.augmentation_log), shortfall=ds.shortfall)
    out = Path(args.out_file)
    out.write_text(json.dumps({"cells": [report.to_dict()]}, indent=1, sort_keys=True) + "\n", encoding="utf-8")
    print(f"{ds.spec.label} {rep.value}: " + ", ".join(f"{k}={v:.4f}" for k, v in report.averaged.items()))
    return 0


def cmd_run_matrix(args, cfg: RunConfig, st: Stage) -> int:
    st.set("load")
    corpus = load_corpus(cfg.corpus)
    reps = [Representation.parse(r) for r in cfg.representations]
    res = load_resources(cfg, reps)
    part = partition_events(corpus)
    cache = FeatureCache()
    params = ForestParams(n_trees=cfg.n_trees, seed=cfg.seed)
    out = Path(cfg.out)
    (out / "manifests").mkdir(parents=True, exist_ok=True)
    h = corpus.content_hash()
    reports = []
    for spec in _grid_specs(cfg):
        st.set("scenario", spec=spec.label, rep="-")
        ds = build_scenario(corpus, spec, res.translator, cfg.target_ratio, partition=part)
        export_manifest(ds, out / "manifests" / _manifest_name(spec), h)
        for rep in reps:
            st.set("experiment", rep=rep.value)
            report = run_experiment(
                corpus, spec, rep, res, cfg.repeats, cfg.seed, params, cfg.target_ratio, part, cache, cfg.workers
            )
            reports.append(report)
            log.info("%s %s f1_positive=%.4f", spec.label, rep.value, report.averaged["f1_positive"])
    st.set("report", spec="-", rep="-")
    matrix = aggregate_matrix(reports)
    for p in emit_report(matrix, out):
        print(p)
    return 0


def cmd_report(args, cfg: RunConfig, st: Stage) -> int:
    st.set("report")
    reports = [r for path in args.reports for r in load_reports(path)]
    for p in emit_report(aggregate_matrix(reports), Path(cfg.out)):
        print(p)
    return 0


def cmd_synth(args, cfg: RunConfig, st: Stage) -> int:
    from .synthetic import SyntheticConfig, write_fixture

    st.set("synth")
    path = write_fixture(args.out_dir, SyntheticConfig(seed=args.seed or 0), n_trees=args.n_trees or 10)
    print(path)
    return 0


# --- parser -------------------------------------------------------------------

def _common(p: argparse.ArgumentParser, *flags: str) -> None:
    p.add_argument("--config", help="JSON run configuration")
    if "corpus" in flags:
        p.add_argument("--corpus", help="unified corpus file (.jsonl or .csv)")
    if "grid" in flags:
        p.add_argument("--kind", help="scenario kind, e.g. cross_lingual_monodomain")
        p.add_argument("--target-lang", dest="target_lang")
        p.add_argument("--target-domain", dest="target_domain")
        p.add_argument("--rep", help="representation, e.g. MT_GloVe")
        p.add_argument("--repeats", type=int)
        p.add_argument("--seed", type=int)
        p.add_argument("--n-trees", dest="n_trees", type=int)
        p.add_argument("--workers", type=int)
    if "out" in flags:
        p.add_argument("--out", help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="crisistl", description="Crisis message transfer-learning experiments")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", metavar="command")
    sub.required = True

    p = sub.add_parser("unify", help="map source labels and taxonomy into one corpus")
    _common(p)
    p.add_argument("sources", nargs="+", help="raw source files (CSV/JSONL)")
    p.add_argument("--mapping", help="label mapping CSV (default: bundled table)")
    p.add_argument("--overrides", help="per-message relabel CSV")
    p.add_argument("--taxonomy", help="event taxonomy CSV/JSONL")
    p.add_argument("--out", dest="out_file", required=True, help="output corpus file")
    p.set_defaults(func=cmd_unify)

    p = sub.add_parser("detect-lang", help="fill missing message languages")
    _common(p, "corpus")
    p.add_argument("--profiles", help="directory of <code>.txt seed corpora")
    p.add_argument("--overwrite", action="store_true")
    p.add_argument("--out", dest="out_file", required=True)
    p.set_defaults(func=cmd_detect_lang)

    p = sub.add_parser("validate", help="check corpus invariants and manifests")
    _common(p, "corpus")
    p.add_argument("--manifest", action="append")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("scenario", help="build split manifests")
    _common(p, "corpus", "grid", "out")
    p.add_argument("--source-lang", dest="source_lang", default="en")
    p.set_defaults(func=cmd_scenario)

    p = sub.add_parser("features", help="build feature matrices for a manifest")
    _common(p, "corpus", "grid", "out")
    p.add_argument("--manifest", required=True)
    p.set_defaults(func=cmd_features)

    for name, func, part in (("train", cmd_train, "train"), ("eval", cmd_eval, "test")):
        p = sub.add_parser(name, help=f"{name} a forest on the {part} matrix")
        _common(p, "corpus", "grid")
        p.add_argument("--manifest", required=True)
        p.add_argument("--features", required=True, help="directory written by 'features'")
        p.add_argument("--model", required=True, help="model file")
        if name == "eval":
            p.add_argument("--out", dest="out_file", required=True, help="report JSON")
        p.set_defaults(func=func)

    p = sub.add_parser("run-matrix", help="run the full scenario x representation grid")
    _common(p, "corpus", "grid", "out")
    p.set_defaults(func=cmd_run_matrix)

    p = sub.add_parser("report", help="aggregate report JSON files into tables")
    _common(p, "out")
    p.add_argument("reports", nargs="+")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("synth", help="write the synthetic fixture corpus, resources and config")
    p.add_argument("out_dir")
    p.add_argument("--seed", type=int)
    p.add_argument("--n-trees", dest="n_trees", type=int)
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0) if exc.code in (0, None) else 2
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    st = Stage()
    try:
        cfg = apply_flags(load_config(getattr(args, "config", None)), args)
        if args.command in ("train", "eval", "features") and not getattr(args, "rep", None):
            raise ConfigError([f"{args.command} needs --rep"])
        if args.command not in ("synth", "report", "unify"):
            cfg.validate(need_corpus=True)
        elif args.command == "unify":
            cfg.validate(need_corpus=False)
        return args.func(args, cfg, st)
    except ConfigError as exc:
        print(f"error: [{st}] {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # every module error becomes a diagnostic, not a traceback
        print(f"error: [{st}] {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
