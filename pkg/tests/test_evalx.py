import json
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from crisistl.corpus import LabelClass
from crisistl.evalx import (
    ConfusionCounts,
    EvalError,
    EvalReport,
    ExperimentError,
    F1Mode,
    RunResult,
    aggregate_matrix,
    confusion_counts,
    emit_report,
    evaluate_manifest,
    f1_score,
    load_reports,
    run_experiment,
)
from crisistl.embed import Representation, Resources
from crisistl.forest import ForestParams
from crisistl.scenario import ScenarioKind, ScenarioSpec, build_scenario, export_manifest, import_manifest

from oracles import f1_reference

R, N = LabelClass.RELATED, LabelClass.NOT_RELATED
FAST = ForestParams(n_trees=10)


def test_confusion_examples():
    assert confusion_counts([R, R, N, N], [R, N, N, R]) == ConfusionCounts(1, 1, 1, 1)
    assert confusion_counts([1] * 4, [1] * 4) == ConfusionCounts(4, 0, 0, 0)
    assert confusion_counts([0] * 3, [1] * 3) == ConfusionCounts(0, 0, 0, 3)
    with pytest.raises(EvalError):
        confusion_counts([1], [1, 0])


def test_f1_examples():
    c = ConfusionCounts(tp=8, fp=2, tn=0, fn=4)
    assert f1_score(c) == 16 / 22
    perfect = ConfusionCounts(5, 0, 5, 0)
    assert all(f1_score(perfect, m) == 1.0 for m in F1Mode)
    z = ConfusionCounts(0, 0, 10, 0)
    assert f1_score(z, "Positive") == 0.0
    assert f1_score(z, "Macro") == 0.5
    assert f1_score(z, "Weighted") == 1.0


counts = st.builds(ConfusionCounts, *(st.integers(0, 50) for _ in range(4))).filter(lambda c: c.total > 0)


@settings(max_examples=200, deadline=None)
@given(counts, st.integers(0, 50))
def test_f1_properties(c, extra_tn):
    pos, macro, weighted = f1_reference(c.tp, c.fp, c.tn, c.fn)
    assert f1_score(c, "Positive") == pytest.approx(float(pos), abs=1e-12)
    assert f1_score(c, "Macro") == pytest.approx(float(macro), abs=1e-12)
    assert f1_score(c, "Weighted") == pytest.approx(float(weighted), abs=1e-12)
    assert f1_score(replace(c, tn=c.tn + extra_tn)) == f1_score(c)
    for m in F1Mode:
        assert 0.0 <= f1_score(c, m) <= 1.0


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 30), st.integers(0, 30), st.integers(1, 30))
def test_weighted_equals_macro_when_balanced(tp, tn, n):
    tp, tn = min(tp, n), min(tn, n)
    c = ConfusionCounts(tp=tp, fn=n - tp, tn=tn, fp=n - tn)
    assert f1_score(c, "Weighted") == pytest.approx(f1_score(c, "Macro"), abs=1e-12)


def _spec(kind="MonolingualMultiDomain", lang="es", dom="earthquake"):
    return ScenarioSpec(ScenarioKind.parse(kind), lang, dom, "en", 11)


def test_run_experiment_repeats_and_average(synth_corpus, synth_resources):
    rep = run_experiment(synth_corpus, _spec(), "MUSE", synth_resources, repeats=5, params=FAST)
    assert len(rep.runs) == 5 and len({r.seed for r in rep.runs}) == 5
    for m in ("f1_positive", "f1_macro", "f1_weighted"):
        vals = [getattr(r, m) for r in rep.runs]
        assert abs(rep.averaged[m] - float(np.mean(vals))) <= 1e-12
        assert min(vals) <= rep.averaged[m] <= max(vals)
    assert all(r.counts.total == rep.n_test for r in rep.runs)


def test_run_experiment_deterministic(synth_corpus, synth_resources):
    a = run_experiment(synth_corpus, _spec(), "LF", synth_resources, repeats=1, params=FAST)
    b = run_experiment(synth_corpus, _spec(), "LF", synth_resources, repeats=1, params=FAST)
    assert a == b


def test_separable_toy_scores_high(synth_corpus, synth_resources):
    rep = run_experiment(synth_corpus, _spec("MultilingualMultiDomain"), "MT_GloVe", synth_resources,
                         repeats=3, params=ForestParams(n_trees=30))
    print(f"synthetic MT_GloVe f1_positive {rep.averaged['f1_positive']:.3f}")
    assert rep.averaged["f1_positive"] >= 0.9


def test_errors_are_annotated(synth_corpus):
    with pytest.raises(ExperimentError) as info:
        run_experiment(synth_corpus, _spec(), "MT_GloVe", Resources(), repeats=2, params=FAST)
    msg = str(info.value)
    assert "MonolingualMultiDomain/es/earthquake" in msg and "rep=MT_GloVe" in msg and "run=0" in msg


def _report(kind, lang, dom, rep, f1, digest="d"):
    c = ConfusionCounts(1, 0, 1, 0)
    run = RunResult(0, c, f1, f1, f1)
    return EvalReport.from_runs(ScenarioSpec(ScenarioKind.parse(kind), lang, dom), rep, [run], test_digest=f"{lang}{dom}{digest}")


def test_aggregate_examples():
    m = aggregate_matrix([_report("CL_MONO", "es", "flood", "LF", 0.80), _report("CL_MONO", "it", "flood", "LF", 0.86)])
    assert m.scenario_average(ScenarioKind.CL_MONO, Representation.LF) == pytest.approx(0.83)
    single = aggregate_matrix([_report("CL_MONO", "es", "flood", "LF", 0.7)])
    assert single.scenario_average(ScenarioKind.CL_MONO, Representation.LF) == 0.7
    with pytest.raises(EvalError, match="duplicate"):
        aggregate_matrix([_report("CL_MONO", "es", "flood", "LF", 0.8)] * 2)


def test_aggregate_rejects_different_test_sets():
    with pytest.raises(EvalError, match="different test sets"):
        aggregate_matrix([_report("CL_MONO", "es", "flood", "LF", 0.8, "a"),
                          _report("MONO_MONO", "es", "flood", "LF", 0.8, "b")])


def test_emit_report(tmp_path):
    reports = [_report("CL_MONO", "es", "flood", "LF", 0.80), _report("CL_MONO", "it", "flood", "LF", 0.86),
               _report("MONO_MONO", "es", "flood", "MUSE", 0.5)]
    paths = emit_report(aggregate_matrix(reports), tmp_path)
    names = sorted(p.name for p in paths)
    assert names == ["confusion_rates.csv", "grid_f1_macro.csv", "grid_f1_positive.csv", "grid_f1_weighted.csv",
                     "plot_es.csv", "plot_it.csv", "report.json"]
    grid = (tmp_path / "grid_f1_positive.csv").read_text().splitlines()
    assert grid[0] == "scenario,LF,MUSE"
    assert grid[1] == "MonolingualMonodomain,,0.500000"
    assert grid[2] == "CrossLingualMonodomain,0.830000,"
    back = load_reports(tmp_path / "report.json")
    assert sorted(r.averaged["f1_positive"] for r in back) == [0.5, 0.8, 0.86]
    assert json.loads((tmp_path / "report.json").read_text())["scenario_averages"]["f1_positive"]["CrossLingualMonodomain"]["LF"] == pytest.approx(0.83)


def test_evaluate_manifest_keeps_split_and_reseeds_forest(synth_corpus, synth_resources, tmp_path):
    spec = ScenarioSpec(ScenarioKind.CL_MONO, "es", "flood", "en", 1)
    ds = build_scenario(synth_corpus, spec, synth_resources.translator)
    export_manifest(ds, tmp_path / "m.json", synth_corpus)
    loaded = import_manifest(tmp_path / "m.json", synth_corpus)
    rep = evaluate_manifest(synth_corpus, loaded, "MUSE", synth_resources, repeats=3, params=ForestParams(n_trees=5))
    assert rep.test_digest == ds.test_digest()
    assert (rep.n_train, rep.n_test) == (len(ds.train), len(ds.test))
    assert len({r.seed for r in rep.runs}) == 3
    with pytest.raises(EvalError):
        evaluate_manifest(synth_corpus, loaded, "MUSE", synth_resources, repeats=0)
