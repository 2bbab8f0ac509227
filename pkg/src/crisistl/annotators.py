"""Rule and lexicon based annotators used by the linguistic feature extractor.

All of them work from the per-language word lists in ``data/lexicons``.
Statistical taggers can replace any of them as long as they keep the same
call signatures.
"""

from __future__ import annotations

import json
import unicodedata
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from typing import Callable

from .tokenize import iter_tokens

POS_TAGS = ("NOUN", "VERB", "ADJ", "ADV", "PRON", "DET", "ADP", "NUM", "CONJ", "PRT", "PUNCT", "X")
NER_TYPES = ("person", "location", "organization")


class UnsupportedLanguage(LookupError):
    pass


@dataclass(frozen=True)
class Lexicon:
    code: str
    stopwords: frozenset
    first_person: frozenset
    positive: frozenset
    negative: frozenset
    pos_words: dict
    suffixes: dict
    gazetteer: dict  # phrase (tuple of lowercase words) -> ner type
    max_phrase: int


@lru_cache(maxsize=None)
def load_lexicon(code: str) -> Lexicon:
    path = resources.files("crisistl") / "data" / "lexicons" / f"{code}.json"
    if not path.is_file():
        raise UnsupportedLanguage(f"no lexicon for language {code!r}")
    raw = json.loads(path.read_text(encoding="utf-8"))
    gazetteer = {}
    for key, kind in (("persons", "person"), ("locations", "location"), ("organizations", "organization")):
        for phrase in raw.get(key, []):
            gazetteer[tuple(phrase.lower().split())] = kind
    return Lexicon(
        code=code,
        stopwords=frozenset(raw["stopwords"]),
        first_person=frozenset(raw["first_person"]),
        positive=frozenset(raw["positive"]),
        negative=frozenset(raw["negative"]),
        pos_words={tag: frozenset(ws) for tag, ws in raw["pos"].items()},
        suffixes={tag: sorted(sfx, key=len, reverse=True) for tag, sfx in raw["suffix"].items()},
        gazetteer=gazetteer,
        max_phrase=max((len(k) for k in gazetteer), default=1),
    )


def _words(text: str) -> list[str]:
    return [tok for kind, tok in iter_tokens(text) if kind == "word"]


def lexicon_sentiment(text: str, language: str) -> tuple[float, int, int]:
    """Returns ``(polarity, positive_count, negative_count)``."""
    lex = load_lexicon(language)
    words = [w.lower() for w in _words(text)]
    pos = sum(w in lex.positive for w in words)
    neg = sum(w in lex.negative for w in words)
    polarity = (pos - neg) / (pos + neg) if pos + neg else 0.0
    return polarity, pos, neg


def gazetteer_ner(text: str, language: str) -> dict[str, int]:
    """Gazetteer phrases first (longest match), then a capitalization fallback.

    Unlisted acronyms of 2-5 capitals count as organizations; unlisted
    Titlecase words that are not sentence-initial and not stopwords count as
    persons.
    """
    lex = load_lexicon(language)
    words = _words(text)
    lower = [w.lower() for w in words]
    counts = dict.fromkeys(NER_TYPES, 0)
    i = 0
    while i < len(words):
        for n in range(min(lex.max_phrase, len(words) - i), 0, -1):
            kind = lex.gazetteer.get(tuple(lower[i : i + n]))
            if kind is not None:
                counts[kind] += 1
                i += n
                break
        else:
            w = words[i]
            if lower[i] not in lex.stopwords and w.isalpha():
                if w.isupper() and 2 <= len(w) <= 5:
                    counts["organization"] += 1
                elif i > 0 and w[0].isupper() and w[1:].islower():
                    counts["person"] += 1
            i += 1
    return counts


def _tag_word(word: str, lex: Lexicon) -> str:
    low = word.lower()
    if low.replace(".", "").replace(",", "").isdigit():
        return "NUM"
    for tag in ("DET", "ADP", "PRON", "CONJ", "PRT", "VERB", "ADV"):
        if low in lex.pos_words.get(tag, ()):
            return tag
    for tag in ("ADV", "VERB", "ADJ"):
        for sfx in lex.suffixes.get(tag, ()):
            if low.endswith(sfx) and len(low) - len(sfx) >= 3:
                return tag
    return "NOUN"


def suffix_pos(text: str, language: str) -> dict[str, int]:
    """Counts over the 12 coarse tags in :data:`POS_TAGS`."""
    lex = load_lexicon(language)
    counts = dict.fromkeys(POS_TAGS, 0)
    for kind, tok in iter_tokens(text):
        if kind == "word":
            counts[_tag_word(tok, lex)] += 1
        elif kind == "other" and not tok.isalnum() and _is_punct(tok):
            counts["PUNCT"] += 1
        else:
            counts["X"] += 1
    return counts


def _is_punct(ch: str) -> bool:
    return unicodedata.category(ch).startswith("P")


def function_words(text: str, language: str) -> tuple[int, int]:
    """Returns ``(stopword_count, first_person_pronoun_count)``."""
    lex = load_lexicon(language)
    words = [w.lower() for w in _words(text)]
    return sum(w in lex.stopwords for w in words), sum(w in lex.first_person for w in words)


@dataclass(frozen=True)
class AnnotatorBundle:
    sentiment: Callable[[str, str], tuple[float, int, int]] = lexicon_sentiment
    ner: Callable[[str, str], dict[str, int]] = gazetteer_ner
    pos: Callable[[str, str], dict[str, int]] = suffix_pos
    function_words: Callable[[str, str], tuple[int, int]] = function_words


DEFAULT_ANNOTATORS = AnnotatorBundle()
