import csv
from pathlib import Path

import pytest

from crisistl.corpus import Corpus
from crisistl.langid import ColumnDetector, InsufficientSignal, NgramDetector, detect_language, fill_languages

from conftest import msg, tiny_corpus

HELDOUT = Path(__file__).parent / "data" / "lang_heldout.tsv"


@pytest.fixture(scope="module")
def detector():
    return NgramDetector.default()


def test_examples(detector):
    assert detector.detect("terremoto ahora en la ciudad, mucha gente en la calle").code == "es"
    assert detector.detect("Awakened by the earthquake, it will not be a good day for many.").code == "en"
    with pytest.raises(InsufficientSignal):
        detect_language("")
    with pytest.raises(InsufficientSignal):
        detector.detect("@user http://t.co/x 12 !!")


def test_heldout_accuracy(detector):
    with open(HELDOUT, encoding="utf-8", newline="") as fh:
        rows = list(csv.DictReader(fh, delimiter="\t"))
    assert len(rows) == 300
    hits = sum(detector.detect(r["text"]).code == r["language"] for r in rows)
    print(f"held-out language accuracy {hits / len(rows):.3f}")
    assert hits / len(rows) >= 0.9


def test_deterministic(detector):
    text = "alluvione a Genova, strade allagate"
    assert detector.detect(text) == detector.detect(text)


def test_fill_languages(detector):
    c = tiny_corpus([msg("a", text="la casa está inundada por el río", language=""),
                     msg("b", text="ok", language=""),
                     msg("c", text="whatever", language="en")])
    out, failed = fill_languages(c, detector)
    assert [m.language for m in out.messages] == ["es", "", "en"]
    assert failed == ["b"]


def test_column_detector():
    d = ColumnDetector({"hola": "es"})
    assert d.detect("hola").code == "es"
    with pytest.raises(KeyError):
        d.detect("hello")
