import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from crisistl.corpus import (
    Corpus,
    CorpusError,
    LabelClass,
    filter_corpus,
    load_corpus,
    save_corpus,
    validate_corpus,
)

from conftest import msg, tiny_corpus


def _write_jsonl(path, records):
    path.write_text("".join(json.dumps(r) + "\n" for r in records), encoding="utf-8")


def _records(n, dup_at=None):
    out = []
    for i in range(n):
        mid = "m0" if dup_at == i else f"m{i}"
        out.append({"id": mid, "text": f"text {i}", "language": "en", "event_id": "e1",
                    "label": "related", "source_dataset": "S"})
    return out


def test_empty_file_gives_empty_corpus(tmp_path):
    p = tmp_path / "c.jsonl"
    p.write_text("")
    c = load_corpus(p)
    assert len(c) == 0 and len(c.events) == 0


def test_duplicate_key_names_both_lines(tmp_path):
    p = tmp_path / "c.jsonl"
    _write_jsonl(p, _records(3, dup_at=2))
    _write_jsonl(tmp_path / "c.events.jsonl", [{"id": "e1", "hazard_type": "flood", "year": 2015}])
    with pytest.raises(CorpusError, match=r"line 1 and line 3"):
        load_corpus(p)


def test_malformed_row_names_line_and_field(tmp_path):
    recs = _records(2)
    del recs[1]["label"]
    p = tmp_path / "c.jsonl"
    _write_jsonl(p, recs)
    with pytest.raises(CorpusError, match=r"line 2.*'label'"):
        load_corpus(p)


def test_dangling_event(tmp_path):
    p = tmp_path / "c.jsonl"
    _write_jsonl(p, _records(2))
    _write_jsonl(tmp_path / "c.events.jsonl", [{"id": "other", "hazard_type": "flood", "year": 2015}])
    with pytest.raises(CorpusError, match="unknown events: e1"):
        load_corpus(p)


def test_validate_examples():
    ok = tiny_corpus([msg(f"m{i}") for i in range(10)])
    assert validate_corpus(ok) == []
    bad = tiny_corpus([msg("a"), msg("b", text="  "), msg("c", language="zz")])
    found = {(v.record_id, v.rule) for v in validate_corpus(bad)}
    assert found == {("b", "empty_text"), ("c", "unknown_language")}


def test_filter_examples():
    ms = [msg(f"m{i}", language="es" if i < 2 else "en") for i in range(6)]
    c = tiny_corpus(ms)
    assert len(filter_corpus(c, {"language": "es"})) == 2
    assert len(filter_corpus(c, {"language": {"fr"}})) == 0
    with pytest.raises(CorpusError):
        filter_corpus(c, {"colour": "red"})


def test_filter_by_hazard():
    c = tiny_corpus([msg("a", event_id="q"), msg("b", event_id="f")], {"q": "earthquake", "f": "flood"})
    out = filter_corpus(c, {"hazard_type": ["flood"]})
    assert [m.id for m in out.messages] == ["b"] and set(out.events) == {"f"}


@pytest.mark.parametrize("suffix", [".jsonl", ".csv"])
def test_round_trip(tmp_path, synth_corpus, suffix):
    p = tmp_path / f"corpus{suffix}"
    save_corpus(synth_corpus, p)
    back = load_corpus(p)
    assert back.messages == synth_corpus.messages
    assert back.content_hash() == synth_corpus.content_hash()


_texts = st.text(alphabet=st.characters(blacklist_categories=("Cs", "Cc")), min_size=1, max_size=40).filter(str.strip)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.tuples(_texts, st.booleans(), st.booleans()), min_size=1, max_size=8))
def test_round_trip_property(tmp_path_factory, rows):
    d = tmp_path_factory.mktemp("rt")
    ms = [msg(f"m{i}", text=t, label=LabelClass.from_int(int(r)), has_media_meta=media)
          for i, (t, r, media) in enumerate(rows)]
    c = tiny_corpus(ms)
    for suffix in (".jsonl", ".csv"):
        save_corpus(c, d / f"c{suffix}")
        assert load_corpus(d / f"c{suffix}").messages == c.messages


def test_by_id_rejects_shared_ids():
    c = tiny_corpus([msg("x", source="A"), msg("x", source="B")])
    with pytest.raises(CorpusError):
        c.by_id()
