"""The 48-dimension linguistic feature (LF) representation."""

from __future__ import annotations

import json
import re
import unicodedata
import warnings
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from typing import Sequence

import numpy as np

from .annotators import DEFAULT_ANNOTATORS, NER_TYPES, POS_TAGS, AnnotatorBundle
from .corpus import Message
from .tokenize import (
    HASHTAG_RE,
    MENTION_RE,
    PLACEHOLDERS,
    URL_RE,
    Normalization,
    iter_tokens,
    tokenize,
)

SCHEMA_VERSION = "lf-v1"

_ELONGATED = re.compile(r"(\w)\1{2,}")
_RETWEET = re.compile(r"^\s*RT\b")
_NUMERIC = re.compile(r"^\d+(?:[.,]\d+)*$")


class AnnotatorWarning(UserWarning):
    """An annotator failed for a message; its features were zero-filled."""


@dataclass(frozen=True)
class FeatureSchema:
    names: tuple[str, ...]
    types: tuple[str, ...]
    version: str

    def __post_init__(self):
        if len(self.names) != 48 or len(set(self.names)) != 48:
            raise ValueError("LF schema must list exactly 48 unique feature names")

    def __len__(self) -> int:
        return len(self.names)

    def index(self, name: str) -> int:
        return self.names.index(name)


@lru_cache(maxsize=None)
def default_schema() -> FeatureSchema:
    raw = json.loads((resources.files("crisistl") / "data" / "lf_schema_v1.json").read_text(encoding="utf-8"))
    return FeatureSchema(
        tuple(f["name"] for f in raw["features"]),
        tuple(f["type"] for f in raw["features"]),
        raw["version"],
    )


def _is_emoji(ch: str) -> bool:
    cp = ord(ch)
    return (
        0x1F300 <= cp <= 0x1FAFF
        or 0x2600 <= cp <= 0x27BF
        or 0x1F000 <= cp <= 0x1F2FF
        or 0x2B00 <= cp <= 0x2BFF
    )


def _annotate(fn, text: str, language: str, what: str, msg_id: str, neutral):
    try:
        return fn(text, language)
    except Exception as exc:  # any annotator failure degrades to the neutral value
        warnings.warn(
            AnnotatorWarning(f"{what} annotator failed for message {msg_id!r} ({language}): {exc}"),
            stacklevel=3,
        )
        return neutral


def extract_linguistic_features(
    message: Message,
    annotators: AnnotatorBundle = DEFAULT_ANNOTATORS,
    schema: FeatureSchema | None = None,
) -> np.ndarray:
    schema = default_schema() if schema is None else schema
    if schema.version != SCHEMA_VERSION:
        raise ValueError(f"unsupported LF schema version {schema.version!r} (expected {SCHEMA_VERSION})")

    text = message.text
    lang = message.language
    chunks = text.split()
    letters = [c for c in text if c.isalpha()]
    words = [tok for kind, tok in iter_tokens(text) if kind == "word"]
    lower_words = [w.lower() for w in words]

    f: dict[str, float] = {}
    f["char_count"] = len(text)
    f["word_count"] = len(chunks)
    f["avg_word_length"] = sum(map(len, chunks)) / len(chunks) if chunks else 0.0
    f["uppercase_char_ratio"] = sum(c.isupper() for c in letters) / len(letters) if letters else 0.0
    f["digit_count"] = sum(c.isdigit() for c in text)
    f["punctuation_count"] = sum(unicodedata.category(c).startswith("P") for c in text)
    f["question_mark_count"] = text.count("?")
    f["exclamation_mark_count"] = text.count("!")
    f["url_count"] = len(URL_RE.findall(text))
    f["mention_count"] = len(MENTION_RE.findall(text))
    f["hashtag_count"] = len(HASHTAG_RE.findall(text))
    f["emoji_count"] = sum(_is_emoji(c) for c in text)
    f["elongated_word_count"] = sum(bool(_ELONGATED.search(w)) for w in words)
    f["retweet_prefix"] = float(bool(_RETWEET.match(text)))

    f["has_url"] = float(f["url_count"] > 0)
    f["has_mention"] = float(f["mention_count"] > 0)
    f["has_hashtag"] = float(f["hashtag_count"] > 0)
    f["has_question_mark"] = float(f["question_mark_count"] > 0)
    f["has_exclamation"] = float(f["exclamation_mark_count"] > 0)
    f["has_digits"] = float(f["digit_count"] > 0)
    f["has_location"] = float(message.has_location_meta)
    f["has_media"] = float(message.has_media_meta)

    n_words = len(words)
    stop, first = _annotate(annotators.function_words, text, lang, "function-word", message.id, (0, 0))
    f["stopword_ratio"] = stop / n_words if n_words else 0.0
    f["type_token_ratio"] = len(set(lower_words)) / n_words if n_words else 0.0
    f["max_word_length"] = max(map(len, words), default=0)
    f["all_caps_word_count"] = sum(
        sum(c.isalpha() for c in w) >= 2 and all(c.isupper() for c in w if c.isalpha()) for w in words
    )
    f["first_person_pronoun_count"] = first
    f["numeric_token_count"] = sum(bool(_NUMERIC.match(w)) for w in words)

    polarity, pos, neg = _annotate(annotators.sentiment, text, lang, "sentiment", message.id, (0.0, 0, 0))
    f["positive_word_count"] = pos
    f["negative_word_count"] = neg
    f["sentiment_polarity"] = max(-1.0, min(1.0, polarity))

    ner = _annotate(annotators.ner, text, lang, "NER", message.id, dict.fromkeys(NER_TYPES, 0))
    f["ner_person_count"] = ner.get("person", 0)
    f["ner_location_count"] = ner.get("location", 0)
    f["ner_organization_count"] = ner.get("organization", 0)
    f["ner_total_count"] = sum(ner.get(k, 0) for k in NER_TYPES)

    pos_counts = _annotate(annotators.pos, text, lang, "POS", message.id, dict.fromkeys(POS_TAGS, 0))
    for tag, name in zip(POS_TAGS, ("noun", "verb", "adj", "adv", "pron", "det", "adp", "num", "conj", "prt", "punct", "other")):
        f[f"pos_{name}_count"] = pos_counts.get(tag, 0)

    cleaned = tokenize(text, Normalization.PLACEHOLDERED)
    f["cleaned_token_count"] = sum(
        t not in PLACEHOLDERS and any(c.isalnum() for c in t) for t in cleaned.tokens
    )

    return np.array([f[name] for name in schema.names], dtype=np.float64)


def lf_matrix(
    messages: Sequence[Message],
    annotators: AnnotatorBundle = DEFAULT_ANNOTATORS,
    schema: FeatureSchema | None = None,
) -> np.ndarray:
    schema = default_schema() if schema is None else schema
    out = np.zeros((len(messages), len(schema)), dtype=np.float64)
    for i, m in enumerate(messages):
        out[i] = extract_linguistic_features(m, annotators, schema)
    return out
