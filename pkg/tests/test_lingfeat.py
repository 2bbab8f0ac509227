import re
import warnings

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from crisistl.annotators import AnnotatorBundle, gazetteer_ner, lexicon_sentiment, suffix_pos
from crisistl.lingfeat import AnnotatorWarning, default_schema, extract_linguistic_features, lf_matrix
from crisistl.tokenize import Normalization, tokenize

from conftest import msg


def feats(text, **kw):
    v = extract_linguistic_features(msg("x", text=text, **kw))
    return dict(zip(default_schema().names, v))


def test_tokenize_examples():
    assert list(tokenize("RT @user1 Fire downtown! http://t.co/x", Normalization.PLACEHOLDERED)) == [
        "<user>", "fire", "downtown", "!", "<url>"]
    assert list(tokenize("")) == []
    assert list(tokenize("Hola   mundo")) == ["Hola", "mundo"]


def test_schema_has_48_unique_names():
    s = default_schema()
    assert len(s) == 48 and len(set(s.names)) == 48 and s.version == "lf-v1"


def test_feature_example_against_regex_oracle():
    text = "Help!! 2 bridges down #flood @redcross http://a.io"
    f = feats(text)
    assert f["question_mark_count"] == text.count("?") == 0
    assert f["exclamation_mark_count"] == len(re.findall("!", text)) == 2
    assert f["hashtag_count"] == len(re.findall(r"#\w+", text)) == 1
    assert f["mention_count"] == len(re.findall(r"@\w+", text)) == 1
    assert f["url_count"] == len(re.findall(r"https?://\S+", text)) == 1
    assert f["has_url"] == 1


def test_empty_text_is_all_zero():
    v = extract_linguistic_features(msg("x", text=""))
    assert not v.any()


def test_metadata_passthrough():
    assert feats("hello", has_location_meta=True)["has_location"] == 1
    assert feats("hello")["has_location"] == 0


def test_annotator_failure_zero_fills_with_warning():
    def broken(text, lang):
        raise RuntimeError("model missing")

    bundle = AnnotatorBundle(sentiment=broken)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        v = extract_linguistic_features(msg("x", text="great help, terrible damage"), bundle)
    assert any(issubclass(w.category, AnnotatorWarning) for w in caught)
    names = default_schema().names
    assert v[names.index("sentiment_polarity")] == 0 and v[names.index("positive_word_count")] == 0


def test_unsupported_language_warns():
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        extract_linguistic_features(msg("x", text="Ein Erdbeben hat die Stadt getroffen", language="de"))
    assert any(issubclass(w.category, AnnotatorWarning) for w in caught)


def test_annotators_per_language():
    pol, pos, neg = lexicon_sentiment("we are safe but many dead", "en")
    assert neg >= 1 and -1 <= pol <= 1
    assert gazetteer_ner("Volunteers from Red Cross arrive", "en")["organization"] >= 1
    tags = suffix_pos("la ciudad está destruida", "es")
    assert sum(tags.values()) == 4 and tags["DET"] == 1


def test_matrix_shape(synth_corpus):
    m = lf_matrix(synth_corpus.messages[:7])
    assert m.shape == (7, 48)


@settings(max_examples=60, deadline=None)
@given(st.text(max_size=80), st.sampled_from(["en", "es", "it"]))
def test_extraction_pure_and_finite(text, lang):
    a = extract_linguistic_features(msg("x", text=text, language=lang))
    b = extract_linguistic_features(msg("x", text=text, language=lang))
    assert a.shape == (48,) and np.isfinite(a).all()
    assert np.array_equal(a, b)
    f = dict(zip(default_schema().names, a))
    assert -1 <= f["sentiment_polarity"] <= 1
    assert 0 <= f["uppercase_char_ratio"] <= 1
    for name, typ in zip(default_schema().names, default_schema().types):
        if typ == "binary":
            assert f[name] in (0, 1)
        if typ == "count":
            assert f[name] >= 0 and f[name] == int(f[name])
