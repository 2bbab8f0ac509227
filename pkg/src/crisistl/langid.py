"""Character n-gram language identification.

Each language profile is a normalized n-gram frequency vector built from a
small bundled seed text. A message is assigned to the profile with the highest
cosine similarity.
"""

from __future__ import annotations

import math
import re
from collections import Counter
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path
from typing import Mapping, Protocol

from .corpus import Corpus, Message

_URL = re.compile(r"(?:https?://|www\.)\S+", re.IGNORECASE)
_MENTION = re.compile(r"@\w+")
_NON_LETTER = re.compile(r"[^\w\s]|\d|_")
_SPACES = re.compile(r"\s+")


class InsufficientSignal(ValueError):
    pass


@dataclass(frozen=True)
class LanguageGuess:
    code: str
    confidence: float


def clean_for_detection(text: str) -> str:
    text = _URL.sub(" ", text)
    text = _MENTION.sub(" ", text)
    text = text.replace("#", " ")
    text = _NON_LETTER.sub(" ", text.lower())
    return _SPACES.sub(" ", text).strip()


def char_ngrams(text: str, n: int = 3) -> Counter:
    grams: Counter = Counter()
    for word in text.split():
        padded = f" {word} "
        for i in range(len(padded) - n + 1):
            grams[padded[i : i + n]] += 1
    return grams


@dataclass
class LanguageProfile:
    code: str
    freqs: dict[str, float]
    norm: float

    @classmethod
    def from_text(cls, code: str, text: str, n: int = 3, top_k: int | None = None) -> "LanguageProfile":
        counts = char_ngrams(clean_for_detection(text), n)
        if top_k is not None:
            counts = Counter(dict(counts.most_common(top_k)))
        total = sum(counts.values()) or 1
        freqs = {g: c / total for g, c in counts.items()}
        return cls(code, freqs, math.sqrt(sum(v * v for v in freqs.values())))


class LanguageDetector(Protocol):
    def detect(self, text: str) -> LanguageGuess: ...


class NgramDetector:
    """Cosine similarity between a message's n-gram counts and each profile."""

    def __init__(self, profiles: Mapping[str, LanguageProfile] | list[LanguageProfile], n: int = 3):
        if not isinstance(profiles, Mapping):
            profiles = {p.code: p for p in profiles}
        if not profiles:
            raise ValueError("at least one language profile is required")
        self.profiles = dict(sorted(profiles.items()))
        self.n = n

    @classmethod
    def from_directory(cls, path: str | Path, n: int = 3) -> "NgramDetector":
        """One ``<code>.txt`` seed file per language."""
        path = Path(path)
        profiles = [
            LanguageProfile.from_text(p.stem, p.read_text(encoding="utf-8"), n)
            for p in sorted(path.glob("*.txt"))
        ]
        return cls(profiles, n)

    @classmethod
    def default(cls) -> "NgramDetector":
        base = resources.files("crisistl") / "data" / "langprofiles"
        profiles = []
        for entry in sorted(base.iterdir(), key=lambda e: e.name):
            if entry.name.endswith(".txt"):
                profiles.append(LanguageProfile.from_text(entry.name[:-4], entry.read_text(encoding="utf-8")))
        return cls(profiles)

    def scores(self, text: str) -> dict[str, float]:
        cleaned = clean_for_detection(text)
        if len(cleaned.replace(" ", "")) < 3:
            raise InsufficientSignal("insufficient signal: fewer than 3 letters after cleanup")
        grams = char_ngrams(cleaned, self.n)
        qnorm = math.sqrt(sum(c * c for c in grams.values()))
        out = {}
        for code, prof in self.profiles.items():
            dot = sum(c * prof.freqs.get(g, 0.0) for g, c in grams.items())
            out[code] = dot / (qnorm * prof.norm) if qnorm and prof.norm else 0.0
        return out

    def detect(self, text: str) -> LanguageGuess:
        scores = self.scores(text)
        # profiles are sorted by code, so max() keeps the lexicographically first on ties
        code = max(scores, key=lambda c: scores[c])
        return LanguageGuess(code, min(1.0, max(0.0, scores[code])))


class ColumnDetector:
    """Answers from a precomputed ``text -> code`` table (output of an external tool)."""

    def __init__(self, table: Mapping[str, str], fallback: LanguageDetector | None = None):
        self.table = dict(table)
        self.fallback = fallback

    def detect(self, text: str) -> LanguageGuess:
        if text in self.table:
            return LanguageGuess(self.table[text], 1.0)
        if self.fallback is None:
            raise KeyError("text not present in the language column")
        return self.fallback.detect(text)


def detect_language(text: str, profiles: Mapping[str, LanguageProfile] | list[LanguageProfile] | None = None) -> LanguageGuess:
    detector = NgramDetector.default() if profiles is None else NgramDetector(profiles)
    return detector.detect(text)


def fill_languages(corpus: Corpus, detector: LanguageDetector, overwrite: bool = False) -> tuple[Corpus, list[str]]:
    """Detect languages for messages that lack one.

    Returns the new corpus and the ids whose text was too short to classify;
    those keep an empty language and surface later as violations.
    """
    out: list[Message] = []
    failed: list[str] = []
    for m in corpus.messages:
        if m.language and not overwrite:
            out.append(m)
            continue
        try:
            guess = detector.detect(m.text)
        except InsufficientSignal:
            failed.append(m.id)
            out.append(m)
            continue
        out.append(replace(m, language=guess.code))
    return replace(corpus, messages=tuple(out)), failed
