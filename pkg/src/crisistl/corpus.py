"""Messages, events and corpora, plus reading/writing the unified on-disk format.

A unified corpus lives in two line-delimited files: one message per line and a
sibling event table (``corpus.jsonl`` + ``corpus.events.jsonl``, or the CSV
equivalents ``corpus.csv`` + ``corpus.events.csv``).
"""

from __future__ import annotations

import csv
import hashlib
import json
from collections import Counter
from dataclasses import asdict, dataclass, field, fields, replace
from enum import Enum
from pathlib import Path
from typing import Iterable, Mapping

from .iso639 import ISO_639_1


class CorpusError(ValueError):
    """Raised when a corpus file or in-memory corpus breaks the data contract."""


class LabelClass(str, Enum):
    RELATED = "related"
    NOT_RELATED = "not_related"

    @property
    def as_int(self) -> int:
        return 1 if self is LabelClass.RELATED else 0

    @classmethod
    def from_int(cls, value: int) -> "LabelClass":
        return cls.RELATED if value else cls.NOT_RELATED


class HazardCategory(str, Enum):
    NATURAL = "natural"
    HUMAN_INDUCED = "human_induced"


class TemporalDevelopment(str, Enum):
    INSTANTANEOUS = "instantaneous"
    PROGRESSIVE = "progressive"


class GeographicSpread(str, Enum):
    FOCALIZED = "focalized"
    DIFFUSED = "diffused"


class CorpusFormat(str, Enum):
    JSONL = "jsonl"
    CSV = "csv"


@dataclass(frozen=True)
class Message:
    id: str
    text: str
    language: str
    event_id: str
    label: LabelClass
    source_dataset: str
    original_label: str = ""
    translated_text: str | None = None
    has_location_meta: bool = False
    has_media_meta: bool = False

    @property
    def key(self) -> tuple[str, str]:
        return (self.source_dataset, self.id)

    def to_record(self) -> dict:
        return {
            "id": self.id,
            "text": self.text,
            "translated_text": self.translated_text,
            "language": self.language,
            "event_id": self.event_id,
            "label": self.label.value,
            "source_dataset": self.source_dataset,
            "original_label": self.original_label,
            "has_location_meta": self.has_location_meta,
            "has_media_meta": self.has_media_meta,
        }


@dataclass(frozen=True)
class Event:
    id: str
    name: str = ""
    hazard_type: str = ""
    hazard_category: HazardCategory | None = None
    hazard_subcategory: str = ""
    temporal_development: TemporalDevelopment | None = None
    geographic_spread: GeographicSpread | None = None
    country: str = ""
    year: int | None = None

    def to_record(self) -> dict:
        rec = asdict(self)
        for key in ("hazard_category", "temporal_development", "geographic_spread"):
            value = getattr(self, key)
            rec[key] = value.value if value is not None else None
        return rec


MESSAGE_FIELDS = [f.name for f in fields(Message)]
EVENT_FIELDS = [f.name for f in fields(Event)]
MESSAGE_FIELD_ORDER = [
    "id", "text", "translated_text", "language", "event_id", "label",
    "source_dataset", "original_label", "has_location_meta", "has_media_meta",
]


@dataclass(frozen=True)
class Corpus:
    messages: tuple[Message, ...] = ()
    events: Mapping[str, Event] = field(default_factory=dict)
    provenance: tuple[str, ...] = ()

    def __len__(self) -> int:
        return len(self.messages)

    def event_of(self, message: Message) -> Event:
        return self.events[message.event_id]

    def by_key(self) -> dict[tuple[str, str], Message]:
        return {m.key: m for m in self.messages}

    def by_id(self) -> dict[str, Message]:
        """Index by bare message id. Only safe when ids are globally unique."""
        out: dict[str, Message] = {}
        for m in self.messages:
            if m.id in out:
                raise CorpusError(
                    f"message id {m.id!r} occurs in several source datasets; "
                    "use by_key() instead"
                )
            out[m.id] = m
        return out

    def label_counts(self) -> Counter:
        return Counter(m.label for m in self.messages)

    def content_hash(self) -> str:
        """SHA-256 over a canonical serialization of messages and events."""
        h = hashlib.sha256()
        for m in self.messages:
            h.update(json.dumps(m.to_record(), sort_keys=True, ensure_ascii=False).encode())
            h.update(b"\n")
        h.update(b"--events--\n")
        for eid in sorted(self.events):
            h.update(json.dumps(self.events[eid].to_record(), sort_keys=True, ensure_ascii=False).encode())
            h.update(b"\n")
        return h.hexdigest()


@dataclass(frozen=True)
class Violation:
    record_id: str
    rule: str
    detail: str = ""


# --- parsing helpers -------------------------------------------------------

_TRUE = {"1", "true", "yes", "y", "t"}
_FALSE = {"0", "false", "no", "n", "f", ""}


def _parse_bool(value, line: int, name: str) -> bool:
    if value is None:
        return False
    if isinstance(value, bool):
        return value
    if isinstance(value, (int, float)):
        return bool(value)
    s = str(value).strip().lower()
    if s in _TRUE:
        return True
    if s in _FALSE:
        return False
    raise CorpusError(f"line {line}: field {name!r}: not a boolean: {value!r}")


def _parse_label(value, line: int) -> LabelClass:
    s = str(value).strip().lower().replace("-", "_").replace(" ", "_")
    try:
        return LabelClass(s)
    except ValueError:
        raise CorpusError(f"line {line}: field 'label': expected related|not_related, got {value!r}") from None


def _parse_enum(enum_cls, value, line: int, name: str):
    if value is None or value == "":
        return None
    s = str(value).strip().lower().replace("-", "_").replace(" ", "_")
    try:
        return enum_cls(s)
    except ValueError:
        allowed = "|".join(e.value for e in enum_cls)
        raise CorpusError(f"line {line}: field {name!r}: expected {allowed}, got {value!r}") from None


def _require(rec: Mapping, name: str, line: int) -> str:
    if name not in rec or rec[name] is None:
        raise CorpusError(f"line {line}: missing field {name!r}")
    return str(rec[name])


def message_from_record(rec: Mapping, line: int = 0) -> Message:
    translated = rec.get("translated_text")
    if translated == "":
        translated = None
    return Message(
        id=_require(rec, "id", line),
        text=_require(rec, "text", line),
        translated_text=translated,
        language=str(rec.get("language") or "").strip().lower(),
        event_id=_require(rec, "event_id", line),
        label=_parse_label(_require(rec, "label", line), line),
        source_dataset=_require(rec, "source_dataset", line),
        original_label=str(rec.get("original_label") or ""),
        has_location_meta=_parse_bool(rec.get("has_location_meta"), line, "has_location_meta"),
        has_media_meta=_parse_bool(rec.get("has_media_meta"), line, "has_media_meta"),
    )


def event_from_record(rec: Mapping, line: int = 0) -> Event:
    year = rec.get("year")
    if year in (None, ""):
        year = None
    else:
        try:
            year = int(year)
        except (TypeError, ValueError):
            raise CorpusError(f"line {line}: field 'year': not an integer: {year!r}") from None
    return Event(
        id=_require(rec, "id", line),
        name=str(rec.get("name") or ""),
        hazard_type=str(rec.get("hazard_type") or "").strip(),
        hazard_category=_parse_enum(HazardCategory, rec.get("hazard_category"), line, "hazard_category"),
        hazard_subcategory=str(rec.get("hazard_subcategory") or ""),
        temporal_development=_parse_enum(
            TemporalDevelopment, rec.get("temporal_development"), line, "temporal_development"
        ),
        geographic_spread=_parse_enum(GeographicSpread, rec.get("geographic_spread"), line, "geographic_spread"),
        country=str(rec.get("country") or ""),
        year=year,
    )


def _read_records(path: Path, fmt: CorpusFormat) -> Iterable[tuple[int, dict]]:
    if fmt is CorpusFormat.JSONL:
        with open(path, encoding="utf-8") as fh:
            for lineno, raw in enumerate(fh, start=1):
                if not raw.strip():
                    continue
                try:
                    rec = json.loads(raw)
                except json.JSONDecodeError as exc:
                    raise CorpusError(f"{path}: line {lineno}: invalid JSON: {exc.msg}") from None
                if not isinstance(rec, dict):
                    raise CorpusError(f"{path}: line {lineno}: expected an object")
                yield lineno, rec
    else:
        with open(path, encoding="utf-8", newline="") as fh:
            reader = csv.DictReader(fh)
            for rec in reader:
                # header is line 1
                yield reader.line_num, rec


def guess_format(path: str | Path) -> CorpusFormat:
    suffix = Path(path).suffix.lower()
    if suffix in (".csv", ".tsv"):
        return CorpusFormat.CSV
    return CorpusFormat.JSONL


def events_path_for(path: str | Path) -> Path:
    path = Path(path)
    return path.with_name(f"{path.stem}.events{path.suffix}")


def load_corpus(
    path: str | Path,
    format: CorpusFormat | str | None = None,
    events_path: str | Path | None = None,
    strict: bool = True,
) -> Corpus:
    """Read a unified corpus.

    Malformed rows, duplicate ``(source_dataset, id)`` keys and dangling event
    references always raise :class:`CorpusError`. With ``strict`` the remaining
    invariants (see :func:`validate_corpus`) are enforced too; pass
    ``strict=False`` to load a corpus that still needs language detection.
    """
    path = Path(path)
    fmt = CorpusFormat(format) if format is not None else guess_format(path)
    events_path = Path(events_path) if events_path is not None else events_path_for(path)

    messages: list[Message] = []
    seen: dict[tuple[str, str], int] = {}
    for lineno, rec in _read_records(path, fmt):
        try:
            msg = message_from_record(rec, lineno)
        except CorpusError as exc:
            raise CorpusError(f"{path}: {exc}") from None
        if msg.key in seen:
            raise CorpusError(
                f"{path}: duplicate message (source_dataset={msg.source_dataset!r}, id={msg.id!r}) "
                f"at line {seen[msg.key]} and line {lineno}"
            )
        seen[msg.key] = lineno
        messages.append(msg)

    events: dict[str, Event] = {}
    if events_path.exists():
        for lineno, rec in _read_records(events_path, fmt):
            ev = event_from_record(rec, lineno)
            if ev.id in events:
                raise CorpusError(f"{events_path}: line {lineno}: duplicate event id {ev.id!r}")
            events[ev.id] = ev
    elif messages:
        raise CorpusError(f"event table not found: {events_path}")

    dangling = sorted({m.event_id for m in messages} - events.keys())
    if dangling:
        raise CorpusError(f"{path}: messages reference unknown events: {', '.join(dangling)}")

    provenance = tuple(sorted({m.source_dataset for m in messages}))
    corpus = Corpus(tuple(messages), events, provenance)
    if strict:
        problems = validate_corpus(corpus)
        if problems:
            listing = "; ".join(f"{v.record_id}: {v.rule}" for v in problems[:10])
            more = f" (+{len(problems) - 10} more)" if len(problems) > 10 else ""
            raise CorpusError(f"{path}: {len(problems)} invariant violation(s): {listing}{more}")
    return corpus


def save_corpus(
    corpus: Corpus,
    path: str | Path,
    format: CorpusFormat | str | None = None,
    events_path: str | Path | None = None,
) -> None:
    path = Path(path)
    fmt = CorpusFormat(format) if format is not None else guess_format(path)
    events_path = Path(events_path) if events_path is not None else events_path_for(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    ev_records = [corpus.events[eid].to_record() for eid in sorted(corpus.events)]
    msg_records = [m.to_record() for m in corpus.messages]
    if fmt is CorpusFormat.JSONL:
        with open(path, "w", encoding="utf-8") as fh:
            for rec in msg_records:
                fh.write(json.dumps(rec, ensure_ascii=False) + "\n")
        with open(events_path, "w", encoding="utf-8") as fh:
            for rec in ev_records:
                fh.write(json.dumps(rec, ensure_ascii=False) + "\n")
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=MESSAGE_FIELD_ORDER)
            writer.writeheader()
            for rec in msg_records:
                rec = dict(rec)
                rec["translated_text"] = rec["translated_text"] or ""
                rec["has_location_meta"] = int(rec["has_location_meta"])
                rec["has_media_meta"] = int(rec["has_media_meta"])
                writer.writerow(rec)
        with open(events_path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=EVENT_FIELDS)
            writer.writeheader()
            for rec in ev_records:
                writer.writerow({k: ("" if v is None else v) for k, v in rec.items()})


def validate_corpus(corpus: Corpus) -> list[Violation]:
    """Check every message/event invariant; violations are returned, not raised."""
    out: list[Violation] = []
    seen_ids: set[str] = set()
    seen_keys: set[tuple[str, str]] = set()
    for m in corpus.messages:
        if not m.id:
            out.append(Violation(m.id, "empty_id"))
        if m.key in seen_keys:
            out.append(Violation(m.id, "duplicate_key", f"source_dataset={m.source_dataset}"))
        seen_keys.add(m.key)
        seen_ids.add(m.id)
        if not m.text.strip():
            out.append(Violation(m.id, "empty_text"))
        if not m.language:
            out.append(Violation(m.id, "missing_language"))
        elif m.language not in ISO_639_1:
            out.append(Violation(m.id, "unknown_language", m.language))
        if m.event_id not in corpus.events:
            out.append(Violation(m.id, "dangling_event", m.event_id))
    for eid in sorted(corpus.events):
        ev = corpus.events[eid]
        if not ev.hazard_type or ev.hazard_type != ev.hazard_type.lower() or " " in ev.hazard_type:
            out.append(Violation(eid, "bad_hazard_type", repr(ev.hazard_type)))
        if ev.year is None or not 1990 <= ev.year <= 2100:
            out.append(Violation(eid, "bad_year", repr(ev.year)))
    return out


FILTER_FIELDS = ("language", "hazard_type", "event_id", "source_dataset")


def _as_set(value) -> frozenset:
    if isinstance(value, (str, bytes)):
        return frozenset([value])
    return frozenset(value)


def filter_corpus(corpus: Corpus, predicate: Mapping[str, object]) -> Corpus:
    """Keep messages matching every clause of ``predicate``.

    Each clause maps one of ``language``, ``hazard_type``, ``event_id`` or
    ``source_dataset`` to a value or a collection of accepted values.
    """
    unknown = set(predicate) - set(FILTER_FIELDS)
    if unknown:
        raise CorpusError(f"unknown filter attribute(s): {', '.join(sorted(unknown))}")
    clauses = {k: _as_set(v) for k, v in predicate.items()}

    def keep(m: Message) -> bool:
        for name, allowed in clauses.items():
            if name == "hazard_type":
                ev = corpus.events.get(m.event_id)
                value = ev.hazard_type if ev is not None else None
            else:
                value = getattr(m, name)
            if value not in allowed:
                return False
        return True

    msgs = tuple(m for m in corpus.messages if keep(m))
    used = {m.event_id for m in msgs}
    events = {eid: ev for eid, ev in corpus.events.items() if eid in used}
    return Corpus(msgs, events, tuple(sorted({m.source_dataset for m in msgs})))


def with_messages(corpus: Corpus, messages: Iterable[Message]) -> Corpus:
    return replace(corpus, messages=tuple(messages))
