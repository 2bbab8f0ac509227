"""Embedding representations: word-vector tables, contextual caches and dispatch.

Every representation maps a list of messages to a dense matrix whose row ``i``
belongs to ``messages[i]``. Labels never pass through here.
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .annotators import DEFAULT_ANNOTATORS, AnnotatorBundle
from .corpus import Message
from .lingfeat import FeatureSchema, default_schema, lf_matrix
from .tokenize import Normalization, TokenSequence, tokenize
from .translate import TranslationClient

log = logging.getLogger(__name__)

PIVOT_LANGUAGE = "en"


class ResourceError(LookupError):
    pass


class VectorFormatError(ValueError):
    pass


class Representation(str, Enum):
    LF = "LF"
    MT_GLOVE = "MT_GloVe"
    MUSE = "MUSE"
    MUSE_LF = "MUSE_LF"
    MBERT = "mBERT"
    MT_BERT = "MT_BERT"
    XLM_R = "XLM_R"

    @classmethod
    def parse(cls, value: "str | Representation") -> "Representation":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("-", "_").replace("+", "_")
        for rep in cls:
            if rep.value.lower() == key or rep.name.lower() == key:
                return rep
        raise ValueError(f"unknown representation {value!r}; expected one of {[r.value for r in cls]}")


CONTEXTUAL = (Representation.MBERT, Representation.MT_BERT, Representation.XLM_R)

REP_DIMS = {
    Representation.LF: 48,
    Representation.MT_GLOVE: 100,
    Representation.MUSE: 300,
    Representation.MUSE_LF: 348,
    Representation.MBERT: 768,
    Representation.MT_BERT: 768,
    Representation.XLM_R: 768,
}


@dataclass
class VectorTable:
    name: str
    dims: int
    index: dict[str, int]
    vectors: np.ndarray
    warnings: list[str] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.index)

    def __contains__(self, token: str) -> bool:
        return token in self.index

    def get(self, token: str) -> np.ndarray | None:
        i = self.index.get(token)
        return None if i is None else self.vectors[i]

    @classmethod
    def from_dict(cls, name: str, entries: Mapping[str, Sequence[float]], dims: int | None = None) -> "VectorTable":
        tokens = list(entries)
        if dims is None:
            dims = len(next(iter(entries.values()))) if entries else 0
        vecs = np.zeros((len(tokens), dims), dtype=np.float64)
        for i, t in enumerate(tokens):
            v = np.asarray(entries[t], dtype=np.float64)
            if v.shape != (dims,):
                raise VectorFormatError(f"{name}: vector for {t!r} has length {v.size}, expected {dims}")
            vecs[i] = v
        return cls(name, dims, {t: i for i, t in enumerate(tokens)}, vecs)


def load_word_vectors(path: str | Path, expected_dims: int, name: str | None = None) -> VectorTable:
    """Read ``token v1 ... vD`` lines with an optional ``N D`` header line."""
    path = Path(path)
    name = name or path.stem
    index: dict[str, int] = {}
    rows: list[list[float]] = []
    warnings: list[str] = []
    with open(path, encoding="utf-8", errors="strict") as fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.rstrip("\r\n").rstrip(" ").split(" ")
            if lineno == 1 and len(parts) == 2 and all(p.isdigit() for p in parts):
                if int(parts[1]) != expected_dims:
                    raise VectorFormatError(
                        f"{path}: line 1: header declares {parts[1]} dims, expected {expected_dims}"
                    )
                continue
            if parts == [""]:
                continue
            token, values = parts[0], parts[1:]
            if len(values) != expected_dims:
                raise VectorFormatError(f"{path}: line {lineno}: {len(values)} values, expected {expected_dims}")
            if token in index:
                msg = f"{path}: line {lineno}: duplicate token {token!r} ignored"
                warnings.append(msg)
                log.warning(msg)
                continue
            try:
                rows.append([float(v) for v in values])
            except ValueError:
                raise VectorFormatError(f"{path}: line {lineno}: non-numeric value") from None
            index[token] = len(rows) - 1
    vectors = np.array(rows, dtype=np.float64).reshape(len(rows), expected_dims)
    return VectorTable(name, expected_dims, index, vectors, warnings)


def save_word_vectors(table: VectorTable, path: str | Path, header: bool = True) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        if header:
            fh.write(f"{len(table)} {table.dims}\n")
        for token, i in table.index.items():
            fh.write(token + " " + " ".join(repr(float(v)) for v in table.vectors[i]) + "\n")


def embed_mean(tokens: TokenSequence | Sequence[str], table: VectorTable, skip_oov: bool = False) -> np.ndarray:
    """Mean of the token vectors; out-of-vocabulary tokens count as zero vectors.

    With ``skip_oov`` they are dropped from the denominator instead.
    """
    toks = list(tokens)
    out = np.zeros(table.dims, dtype=np.float64)
    rows = [table.index[t] for t in toks if t in table.index]
    denom = len(rows) if skip_oov else len(toks)
    if not rows or denom == 0:
        return out
    out = table.vectors[rows].sum(axis=0)
    return out / denom


# --- contextual caches -------------------------------------------------------

@dataclass
class ContextualCache:
    model_name: str
    dims: int
    entries: dict[str, np.ndarray]

    def __contains__(self, message_id: str) -> bool:
        return message_id in self.entries

    def entry(self, message_id: str) -> np.ndarray:
        try:
            return self.entries[message_id]
        except KeyError:
            raise ResourceError(
                f"message {message_id!r} missing from contextual cache {self.model_name!r}"
            ) from None

    def pooled(self, message_id: str) -> np.ndarray:
        return pool_contextual(self.entry(message_id))


def pool_contextual(entry: np.ndarray) -> np.ndarray:
    """Mean over the non-padding rows of a token matrix; vectors pass through."""
    arr = np.asarray(entry, dtype=np.float64)
    if arr.ndim == 1:
        return arr
    keep = np.any(arr != 0.0, axis=1)
    if not keep.any():
        return np.zeros(arr.shape[1], dtype=np.float64)
    return arr[keep].mean(axis=0)


def load_contextual_cache(path: str | Path, dims: int = 768, model_name: str | None = None) -> ContextualCache:
    """Read ``{id, model_name, vector | token_matrix}`` records."""
    path = Path(path)
    entries: dict[str, np.ndarray] = {}
    name = model_name
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            rec = json.loads(line)
            if name is None:
                name = rec.get("model_name", path.stem)
            if "vector" in rec:
                arr = np.asarray(rec["vector"], dtype=np.float64)
                ok = arr.ndim == 1 and arr.shape[0] == dims
            elif "token_matrix" in rec:
                arr = np.asarray(rec["token_matrix"], dtype=np.float64)
                ok = arr.ndim == 2 and arr.shape[1] == dims
            else:
                raise VectorFormatError(f"{path}: line {lineno}: record needs 'vector' or 'token_matrix'")
            if not ok:
                raise VectorFormatError(f"{path}: line {lineno}: rows must have length {dims}")
            entries[str(rec["id"])] = arr
    return ContextualCache(name or path.stem, dims, entries)


def save_contextual_cache(cache: ContextualCache, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for mid, arr in cache.entries.items():
            key = "vector" if arr.ndim == 1 else "token_matrix"
            fh.write(json.dumps({"id": mid, "model_name": cache.model_name, key: arr.tolist()}) + "\n")


# --- dispatch ---------------------------------------------------------------

@dataclass
class Resources:
    """Everything the seven representations may need; absent pieces are ``None``/empty."""

    glove: VectorTable | None = None
    muse: dict[str, VectorTable] = field(default_factory=dict)
    caches: dict[Representation, ContextualCache] = field(default_factory=dict)
    annotators: AnnotatorBundle = DEFAULT_ANNOTATORS
    translator: TranslationClient | None = None
    schema: FeatureSchema | None = None
    skip_oov: bool = False


@dataclass
class FeatureMatrix:
    representation: Representation
    values: np.ndarray
    columns: tuple[str, ...]
    row_ids: tuple[str, ...]

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["id", *self.columns])
            for rid, row in zip(self.row_ids, self.values):
                w.writerow([rid, *(repr(float(v)) for v in row)])

    @classmethod
    def from_csv(cls, path: str | Path, representation: Representation) -> "FeatureMatrix":
        with open(path, encoding="utf-8", newline="") as fh:
            r = csv.reader(fh)
            header = next(r)
            ids, rows = [], []
            for rec in r:
                ids.append(rec[0])
                rows.append([float(v) for v in rec[1:]])
        values = np.array(rows, dtype=np.float64).reshape(len(rows), len(header) - 1)
        return cls(representation, values, tuple(header[1:]), tuple(ids))


def _check_dims(rep: Representation, what: str, dims: int, expected: int) -> None:
    if dims != expected:
        raise ResourceError(f"{rep.value}: {what} has {dims} dims, expected {expected}")


def pivot_texts(messages: Sequence[Message], translator: TranslationClient | None, rep: Representation) -> list[str]:
    """English text for each message: raw text for English, else its translation."""
    out: list[str] = []
    missing: list[str] = []
    for m in messages:
        if m.language == PIVOT_LANGUAGE:
            out.append(m.text)
        elif m.translated_text:
            out.append(m.translated_text)
        elif translator is not None:
            out.append(translator.translate(m.text, m.language, PIVOT_LANGUAGE))
        else:
            missing.append(m.id)
            out.append("")
    if missing:
        shown = ", ".join(missing[:20]) + (" ..." if len(missing) > 20 else "")
        raise ResourceError(f"{rep.value}: no translation and no translation client for message(s): {shown}")
    return out


def _glove_matrix(messages, res: Resources, rep: Representation) -> np.ndarray:
    if res.glove is None:
        raise ResourceError(f"{rep.value}: GloVe vector table not provided")
    _check_dims(rep, f"vector table {res.glove.name!r}", res.glove.dims, 100)
    texts = pivot_texts(messages, res.translator, rep)
    out = np.zeros((len(messages), res.glove.dims))
    for i, t in enumerate(texts):
        out[i] = embed_mean(tokenize(t, Normalization.PLACEHOLDERED), res.glove, res.skip_oov)
    return out


def _muse_matrix(messages, res: Resources, rep: Representation) -> np.ndarray:
    langs = sorted({m.language for m in messages})
    absent = [lang for lang in langs if lang not in res.muse]
    if absent:
        raise ResourceError(f"{rep.value}: no aligned vector table for language(s): {', '.join(absent)}")
    for lang in langs:
        _check_dims(rep, f"aligned table for {lang!r}", res.muse[lang].dims, 300)
    out = np.zeros((len(messages), 300))
    for i, m in enumerate(messages):
        out[i] = embed_mean(tokenize(m.text, Normalization.PLACEHOLDERED), res.muse[m.language], res.skip_oov)
    return out


def _contextual_matrix(messages, res: Resources, rep: Representation) -> np.ndarray:
    cache = res.caches.get(rep)
    if cache is None:
        raise ResourceError(f"{rep.value}: contextual cache not provided")
    _check_dims(rep, f"cache {cache.model_name!r}", cache.dims, 768)
    out = np.zeros((len(messages), cache.dims))
    for i, m in enumerate(messages):
        out[i] = cache.pooled(m.id)
    return out


def column_names(rep: Representation, schema: FeatureSchema | None = None) -> tuple[str, ...]:
    schema = default_schema() if schema is None else schema
    if rep is Representation.LF:
        return schema.names
    if rep is Representation.MUSE_LF:
        return tuple(f"muse_{i}" for i in range(300)) + schema.names
    prefix = rep.value.lower()
    return tuple(f"{prefix}_{i}" for i in range(REP_DIMS[rep]))


def build_representation(
    messages: Sequence[Message], rep: Representation | str, resources: Resources
) -> FeatureMatrix:
    rep = Representation.parse(rep)
    messages = list(messages)
    if rep is Representation.LF:
        values = lf_matrix(messages, resources.annotators, resources.schema)
    elif rep is Representation.MT_GLOVE:
        values = _glove_matrix(messages, resources, rep)
    elif rep is Representation.MUSE:
        values = _muse_matrix(messages, resources, rep)
    elif rep is Representation.MUSE_LF:
        values = np.hstack(
            [_muse_matrix(messages, resources, rep), lf_matrix(messages, resources.annotators, resources.schema)]
        )
    else:
        values = _contextual_matrix(messages, resources, rep)
    values = values.reshape(len(messages), REP_DIMS[rep])
    return FeatureMatrix(rep, values, column_names(rep, resources.schema), tuple(m.id for m in messages))
