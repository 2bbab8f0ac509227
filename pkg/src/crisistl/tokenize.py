"""Tweet tokenization with optional URL / mention placeholders."""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum

URL_RE = re.compile(r"(?:https?://|www\.)\S+", re.IGNORECASE)
MENTION_RE = re.compile(r"(?<!\w)@\w+")
HASHTAG_RE = re.compile(r"(?<!\w)#\w+")

_TOKEN_RE = re.compile(
    r"""
    (?P<url>(?:https?://|www\.)\S+)
  | (?P<mention>(?<!\w)@\w+)
  | (?P<hashtag>(?<!\w)\#\w+)
  | (?P<word>\w+(?:['’]\w+)*)
  | (?P<other>[^\w\s])
    """,
    re.VERBOSE | re.IGNORECASE,
)

URL_TOKEN = "<url>"
USER_TOKEN = "<user>"
PLACEHOLDERS = frozenset({URL_TOKEN, USER_TOKEN})


class Normalization(str, Enum):
    RAW = "raw"
    PLACEHOLDERED = "placeholdered"


@dataclass(frozen=True)
class TokenSequence:
    tokens: tuple[str, ...]
    normalization: Normalization

    def __len__(self) -> int:
        return len(self.tokens)

    def __iter__(self):
        return iter(self.tokens)


def iter_tokens(text: str):
    """Yield ``(kind, token)`` pairs; kind is url, mention, hashtag, word or other."""
    for m in _TOKEN_RE.finditer(text):
        yield m.lastgroup, m.group()


def tokenize(text: str, mode: Normalization | str = Normalization.RAW) -> TokenSequence:
    """Split a tweet into tokens.

    In placeholdered mode tokens are lowercased, URLs become ``<url>``,
    mentions ``<user>``, hashtags lose their ``#`` and a leading ``RT`` marker
    is dropped.
    """
    mode = Normalization(mode)
    pairs = list(iter_tokens(text))
    if mode is Normalization.RAW:
        return TokenSequence(tuple(tok for _, tok in pairs), mode)
    if pairs and pairs[0][0] == "word" and pairs[0][1].lower() == "rt":
        pairs = pairs[1:]
        if pairs and pairs[0] == ("other", ":"):
            pairs = pairs[1:]
    out = []
    for kind, tok in pairs:
        if kind == "url":
            out.append(URL_TOKEN)
        elif kind == "mention":
            out.append(USER_TOKEN)
        elif kind == "hashtag":
            out.append(tok[1:].lower())
        else:
            out.append(tok.lower())
    return TokenSequence(tuple(out), mode)
