"""Acceptance suite: one test per primary criterion, each printing a PASS/FAIL line."""

import filecmp
import math
import os
import time
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from crisistl.cli import main
from crisistl.corpus import LabelClass, Message, load_corpus
from crisistl.embed import (
    REP_DIMS,
    ContextualCache,
    Representation,
    Resources,
    VectorTable,
    build_representation,
    embed_mean,
    load_word_vectors,
    pool_contextual,
)
from crisistl.evalx import (
    ConfusionCounts,
    aggregate_matrix,
    confusion_counts,
    evaluate_manifest,
    f1_score,
    run_experiment,
)
from crisistl.forest import ForestParams, MaxFeatures, fit_forest, gini_impurity
from crisistl.scenario import (
    ScenarioKind,
    ScenarioSpec,
    balance_training_set,
    build_scenario,
    import_manifest,
    partition_events,
)
from crisistl.synthetic import DOMAINS, LANGUAGES, dictionaries, write_fixture
from crisistl.translate import CachedTranslator, DictionaryTranslator, TranslationCache
from crisistl.unify import apply_label_mapping, default_label_mapping

from oracles import cart_oracle, cart_predict, f1_reference, naive_mean

R, N = LabelClass.RELATED, LabelClass.NOT_RELATED


@pytest.fixture
def verdict(capsys):
    def report(name: str, ok: bool, detail: str = "") -> None:
        with capsys.disabled():
            print(f"\n[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
        assert ok, f"{name}: {detail}"

    return report


def test_leakage_suite(synth_corpus, synth_resources, verdict):
    start = time.perf_counter()
    assert len(synth_corpus.events) >= 12
    part = partition_events(synth_corpus)
    by_id = synth_corpus.by_id()
    built, problems = 0, []
    for kind in ScenarioKind:
        for lang in LANGUAGES:
            if kind.cross_lingual and lang == "en":
                continue
            for dom in DOMAINS:
                spec = ScenarioSpec(kind, lang, dom, "en", 3)
                ds = build_scenario(synth_corpus, spec, synth_resources.translator, partition=part)
                built += 1
                train_ids = {i for i, _ in ds.train}
                test_ids = {i for i, _ in ds.test}
                train_msg_events = {by_id[i].event_id for i in train_ids}
                test_msg_events = {by_id[i].event_id for i in test_ids if i in by_id}
                if ds.train_events & ds.test_events:
                    problems.append(f"{spec.label}: shared events")
                if train_ids & test_ids:
                    problems.append(f"{spec.label}: shared message ids")
                if train_msg_events & test_msg_events:
                    problems.append(f"{spec.label}: a test message comes from a training event")
    elapsed = time.perf_counter() - start
    ok = not problems and built == sum(6 if k.cross_lingual else 9 for k in ScenarioKind) and elapsed < 10
    verdict("leakage", ok, f"{built} scenarios over {len(synth_corpus.events)} events, "
                           f"{len(problems)} leaks, {elapsed:.2f}s")


def test_balance_suite(verdict):
    rng = np.random.default_rng(2024)
    bad = []
    for trial in range(200):
        p, n = (int(v) for v in rng.integers(1, 400, size=2))
        items = [(f"p{i}", R) for i in range(p)] + [(f"n{i}", N) for i in range(n)]
        out = balance_training_set(items, int(rng.integers(0, 2**32)))
        target = (p + n) // 2
        pos = [x for x in out if x[1] is R]
        neg = [x for x in out if x[1] is N]
        neg_inputs = {x for x in items if x[1] is N}
        if len(pos) != target or len(neg) != target:
            bad.append((p, n, "counts"))
        if not set(neg) <= neg_inputs or not set(pos) <= set(items):
            bad.append((p, n, "foreign item"))
    verdict("balance", not bad, f"200 random (P, N) pairs, {len(bad)} failures")


def test_aggregation_oracle(verdict):
    rng = np.random.default_rng(7)
    vocab = [f"w{i}" for i in range(40)]
    entries = {w: rng.normal(0, 3, 16) for w in vocab}
    table = VectorTable.from_dict("t", entries)
    worst, empties, oov_lists = 0.0, 0, 0
    for _ in range(1000):
        size = int(rng.integers(0, 25))
        tokens = [str(t) for t in rng.choice(vocab + ["oov1", "oov2", "<url>"], size=size)]
        empties += size == 0
        oov_lists += any(t not in entries for t in tokens)
        got = embed_mean(tokens, table)
        ref = np.array(naive_mean(tokens, entries, 16))
        worst = max(worst, float(np.max(np.abs(got - ref))))
    pooled = pool_contextual(np.array([[1.0, 1.0], [3.0, 3.0], [0.0, 0.0]]))
    ok = worst <= 1e-12 and empties > 0 and oov_lists > 0 and pooled.tolist() == [2.0, 2.0]
    verdict("aggregation", ok, f"max |embed_mean - naive| = {worst:.2e} over 1000 lists "
                               f"({empties} empty, {oov_lists} with OOV); pool toy -> {pooled.tolist()}")


def _leaf_ok(tree, min_split):
    leaves = tree.feature < 0
    counts = tree.counts[leaves]
    pure = (counts == 0).any(axis=1)
    small = counts.sum(axis=1) < min_split
    return bool((pure | small).all())


def test_forest_correctness(verdict):
    rng = np.random.default_rng(11)
    single = ForestParams(n_trees=1, bootstrap=False, max_features=MaxFeatures.ALL, seed=0)
    mismatches, stop_failures = 0, 0
    for k in range(50):
        if k % 2:
            X = rng.integers(0, 5, (12, 3)).astype(float)  # ties and repeated values
        else:
            X = np.round(rng.normal(0, 1, (12, 3)), 3)
        y = rng.integers(0, 2, 12)
        y[0], y[1] = 0, 1
        model = fit_forest(X, y, single)
        oracle = cart_oracle(X.tolist(), y.tolist())
        probe = np.vstack([X, rng.integers(-1, 6, (40, 3)).astype(float), np.round(rng.normal(0, 1, (40, 3)), 3)])
        expected = [cart_predict(oracle, r) for r in probe.tolist()]
        mismatches += model.predict(probe).tolist() != expected
        if len({tuple(r) for r in X.tolist()}) == 12:  # distinct rows: every leaf must end pure or tiny
            stop_failures += not _leaf_ok(model.trees[0], 2)

    def blobs(n, seed):
        g = np.random.default_rng(seed)
        Xb = np.vstack([g.normal(0, 1, (n // 2, 2)), g.normal(3, 1, (n // 2, 2))])
        return Xb, np.array([0] * (n // 2) + [1] * (n // 2))

    Xtr, ytr = blobs(500, 1)
    Xte, yte = blobs(500, 2)
    start = time.perf_counter()
    forest = fit_forest(Xtr, ytr, ForestParams(seed=5))
    f1 = f1_score(confusion_counts(forest.predict(Xte), yte))
    elapsed = time.perf_counter() - start
    ok = mismatches == 0 and stop_failures == 0 and f1 >= 0.95 and elapsed < 30
    verdict("forest", ok, f"CART oracle mismatches {mismatches}/50, stopping-rule failures {stop_failures}, "
                          f"blob F1 {f1:.4f} in {elapsed:.2f}s")


def test_metric_suite(synth_corpus, synth_resources, verdict):
    checks = [
        confusion_counts([R, R, N, N], [R, N, N, R]) == ConfusionCounts(1, 1, 1, 1),
        confusion_counts([R] * 6, [R] * 6) == ConfusionCounts(6, 0, 0, 0),
        confusion_counts([N] * 6, [R] * 6) == ConfusionCounts(0, 0, 0, 6),
        f1_score(ConfusionCounts(8, 2, 0, 4), "Positive") == 16 / 22,
        all(f1_score(ConfusionCounts(7, 0, 3, 0), m) == 1.0 for m in ("Positive", "Macro", "Weighted")),
        f1_score(ConfusionCounts(0, 0, 10, 0), "Positive") == 0.0,
        f1_score(ConfusionCounts(0, 0, 10, 0), "Macro") == 0.5,
        gini_impurity((10, 0)) == 0.0,
        gini_impurity((5, 5)) == 0.5,
        gini_impurity((3, 1)) == 0.375,
    ]
    spec = ScenarioSpec(ScenarioKind.CL_MULTI, "it", "flood", "en", 4)
    rep = run_experiment(synth_corpus, spec, "MUSE_LF", synth_resources, repeats=5, params=ForestParams(n_trees=10))
    worst = 0.0
    for i, name in enumerate(("f1_positive", "f1_macro", "f1_weighted")):
        # recompute every run's metric from its confusion counts with exact arithmetic
        vals = [float(f1_reference(r.counts.tp, r.counts.fp, r.counts.tn, r.counts.fn)[i]) for r in rep.runs]
        worst = max(worst, abs(math.fsum(vals) / len(vals) - rep.averaged[name]))
    ok = all(checks) and len(rep.runs) == 5 and worst <= 1e-12
    verdict("metrics", ok, f"{sum(checks)}/{len(checks)} hand examples, 5-run average deviation {worst:.1e}")


def test_run_matrix_determinism(tmp_path, verdict):
    write_fixture(tmp_path, n_trees=5)
    outs = []
    for run in ("a", "b"):
        out = tmp_path / f"reports_{run}"
        assert main(["run-matrix", "--config", str(tmp_path / "config.json"), "--out", str(out), "--seed", "13"]) == 0
        outs.append(out)
    files = sorted(p.relative_to(outs[0]) for p in outs[0].rglob("*") if p.is_file())
    other = sorted(p.relative_to(outs[1]) for p in outs[1].rglob("*") if p.is_file())
    same = files == other and all(filecmp.cmp(outs[0] / f, outs[1] / f, shallow=False) for f in files)
    verdict("determinism", same and len(files) > 0, f"{len(files)} report/manifest files compared byte for byte")


EXPECTED_WIDTHS = {"LF": 48, "MT_GloVe": 100, "MUSE": 300, "MUSE_LF": 348, "mBERT": 768, "MT_BERT": 768, "XLM_R": 768}
_DIM_WORDS = sorted({w for table in dictionaries().values() for w in table}) + ["zzz", "@user", "http://x.io", "#tag", "!!"]


def _dimension_resources(messages, seed):
    rng = np.random.default_rng(seed)
    caches = {}
    for rep in (Representation.MBERT, Representation.MT_BERT, Representation.XLM_R):
        entries = {}
        for k, m in enumerate(messages):
            # alternate pre-pooled vectors and token matrices with padding rows
            entries[m.id] = rng.normal(size=768) if k % 2 else np.vstack([rng.normal(size=(3, 768)), np.zeros((2, 768))])
        caches[rep] = ContextualCache(rep.value, 768, entries)
    return Resources(
        glove=VectorTable.from_dict("g", {"water": rng.normal(size=100)}, 100),
        muse={lang: VectorTable.from_dict(lang, {"agua": rng.normal(size=300)}, 300) for lang in LANGUAGES},
        caches=caches,
        translator=CachedTranslator(DictionaryTranslator(dictionaries()), TranslationCache()),
    )


_message_text = st.one_of(
    st.text(max_size=60),
    st.lists(st.sampled_from(_DIM_WORDS), max_size=15).map(" ".join),
)


def test_dimensional_contract(verdict):
    seen: dict[str, set[int]] = {}

    @settings(max_examples=60, deadline=None)
    @given(st.lists(st.tuples(_message_text, st.sampled_from(LANGUAGES)), min_size=1, max_size=6), st.integers(0, 99))
    def check(rows, seed):
        messages = [Message(f"m{i}", text, lang, "e", R, "S") for i, (text, lang) in enumerate(rows)]
        res = _dimension_resources(messages, seed)
        for rep in Representation:
            fm = build_representation(messages, rep, res)
            assert fm.values.shape[0] == len(messages)
            assert np.isfinite(fm.values).all()
            seen.setdefault(rep.value, set()).add(fm.values.shape[1])

    failure = ""
    try:
        check()
    except Exception as exc:  # reported through the verdict line below
        failure = f"{type(exc).__name__}: {exc}"
    ok = not failure and seen == {k: {v} for k, v in EXPECTED_WIDTHS.items()}
    ok = ok and {r.value: d for r, d in REP_DIMS.items()} == EXPECTED_WIDTHS
    detail = failure or ", ".join(f"{k}={sorted(v)}" for k, v in seen.items())
    verdict("dimensions", ok, detail)


# every label string quoted as an example of the two classes, with a source that uses it
QUOTED_NOT_RELATED = [
    ("CrisisLexT26", "not related"),
    ("Ecuador-Earthquake", "not relevant"),
    ("CrisisNLP_R1", "not related or irrelevant"),
    ("CrisisLexT6", "off-topic"),
    ("CrisisMMD", "not informative"),
    ("CrisisLexT26", "not applicable"),
    ("CrisisLexT26", "Not applicable"),
    ("CrisisNLP_R1", "not physical landslide"),
]
QUOTED_RELATED = [
    ("Ecuador-Earthquake", "related"),
    ("ChileEarthquakeT1", "relevant"),
    ("SoSItalyT4", "damage"),
    ("SoSItalyT4", "no damage"),
    ("CrisisLexT6", "on-topic"),
    ("CrisisMMD", "informative"),
    ("CrisisLexT26", "related and informative"),
    ("CrisisLexT26", "related but not informative"),
    ("CrisisLexT26", "related - but not informative"),
]


def test_label_mapping_fidelity(verdict):
    rows = []
    for i, (ds, label) in enumerate(QUOTED_NOT_RELATED + QUOTED_RELATED):
        rows.append({"id": str(i), "text": "t", "language": "en", "event_id": "e", "source_dataset": ds,
                     "original_label": label})
    res = apply_label_mapping(rows, default_label_mapping())
    expected = [N] * len(QUOTED_NOT_RELATED) + [R] * len(QUOTED_RELATED)
    got = [m.label for m in res.messages]
    ok = got == expected and res.unmapped == [] and res.discarded == 0
    verdict("label mapping", ok, f"{len(rows)} quoted labels, {sum(a == b for a, b in zip(got, expected))} correct, "
                                 f"{len(res.unmapped)} unmapped")


PUBLISHED = os.environ.get("CRISISTL_PUBLISHED_DATA")


@pytest.mark.skipif(not PUBLISHED or not Path(PUBLISHED).is_dir(),
                    reason="set CRISISTL_PUBLISHED_DATA to a directory with the published corpus and resources")
def test_published_data_tier(verdict):
    """Expects corpus.jsonl, glove.100d.txt, translations.jsonl and manifests/*.json in the data directory."""
    root = Path(PUBLISHED)
    corpus = load_corpus(root / "corpus.jsonl")
    res = Resources(glove=load_word_vectors(root / "glove.100d.txt", 100),
                    translator=CachedTranslator(None, TranslationCache(root / "translations.jsonl")))
    reports = [evaluate_manifest(corpus, import_manifest(p, corpus), "MT_GloVe", res, repeats=5)
               for p in sorted((root / "manifests").glob("*.json"))]
    matrix = aggregate_matrix(reports)
    cell = [r for r in reports if r.spec.kind is ScenarioKind.MONO_MONO
            and (r.spec.target_language, r.spec.target_domain) == ("en", "earthquake")]
    f1 = cell[0].averaged["f1_positive"] if cell else float("nan")
    avgs = {k: matrix.scenario_average(k, Representation.MT_GLOVE)
            for k in matrix.kinds() if k is not ScenarioKind.MONO_MONO}
    order_ok = bool(avgs) and min(avgs, key=avgs.get) is ScenarioKind.MONO_CROSS \
        and max(avgs, key=avgs.get) is ScenarioKind.ML_MULTI
    verdict("published data", abs(f1 - 0.82) <= 0.05 and order_ok,
            f"en/earthquake MT_GloVe F1 {f1:.3f} (target 0.82 +/- 0.05); scenario ordering ok={order_ok}")
