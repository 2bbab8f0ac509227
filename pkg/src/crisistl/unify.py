"""Build the unified multi-crisis corpus from heterogeneous labeled sources.

Covers label merging (a versioned mapping table plus per-message overrides),
event taxonomy annotation and the deduplicating merge of per-source corpora.
Language detection lives in :mod:`crisistl.langid`.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field, replace
from enum import Enum
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .corpus import (
    Corpus,
    CorpusError,
    Event,
    GeographicSpread,
    HazardCategory,
    LabelClass,
    Message,
    TemporalDevelopment,
    event_from_record,
    message_from_record,
)


class MappingAction(str, Enum):
    MAP_RELATED = "map_related"
    MAP_NOT_RELATED = "map_not_related"
    DISCARD = "discard"

    @classmethod
    def parse(cls, value: str) -> "MappingAction":
        s = value.strip().lower().replace("-", "_").replace(" ", "_")
        aliases = {"related": "map_related", "not_related": "map_not_related"}
        return cls(aliases.get(s, s))

    @property
    def label(self) -> LabelClass | None:
        if self is MappingAction.MAP_RELATED:
            return LabelClass.RELATED
        if self is MappingAction.MAP_NOT_RELATED:
            return LabelClass.NOT_RELATED
        return None


def normalize_label(label: str) -> str:
    return label.strip().lower()


@dataclass(frozen=True)
class MappingEntry:
    source_dataset: str
    original_label: str
    action: MappingAction


@dataclass
class LabelMapping:
    """Exact ``(source_dataset, original_label)`` lookup table.

    Labels are compared after trimming and lowercasing. ``overrides`` holds
    per-message relabels keyed by ``(source_dataset, id)`` and wins over the
    label lookup.
    """

    entries: list[MappingEntry] = field(default_factory=list)
    overrides: dict[tuple[str, str], MappingAction] = field(default_factory=dict)
    version: str = ""

    def __post_init__(self):
        self._index: dict[tuple[str, str], MappingEntry] = {}
        for e in self.entries:
            key = (e.source_dataset, normalize_label(e.original_label))
            if key in self._index:
                raise CorpusError(f"label mapping: duplicate entry for {key}")
            self._index[key] = e

    def lookup(self, source_dataset: str, original_label: str) -> MappingEntry | None:
        return self._index.get((source_dataset, normalize_label(original_label)))

    def check(self) -> list[str]:
        """Datasets lacking a Related or NotRelated entry (unless discard-only)."""
        problems = []
        by_ds: dict[str, set[MappingAction]] = {}
        for e in self.entries:
            by_ds.setdefault(e.source_dataset, set()).add(e.action)
        for ds, actions in sorted(by_ds.items()):
            if actions == {MappingAction.DISCARD}:
                continue
            for needed in (MappingAction.MAP_RELATED, MappingAction.MAP_NOT_RELATED):
                if needed not in actions:
                    problems.append(f"{ds}: no {needed.value} entry")
        return problems

    @property
    def datasets(self) -> list[str]:
        return sorted({e.source_dataset for e in self.entries})


def load_label_mapping(path: str | Path, overrides_path: str | Path | None = None) -> LabelMapping:
    """Read ``source_dataset,original_label,action`` (+ optional ``source_dataset,id,action``)."""
    entries = []
    with open(path, encoding="utf-8", newline="") as fh:
        for row in csv.DictReader(row for row in fh if not row.startswith("#")):
            entries.append(
                MappingEntry(row["source_dataset"].strip(), row["original_label"], MappingAction.parse(row["action"]))
            )
    overrides = {}
    if overrides_path is not None:
        with open(overrides_path, encoding="utf-8", newline="") as fh:
            for row in csv.DictReader(row for row in fh if not row.startswith("#")):
                overrides[(row["source_dataset"].strip(), row["id"].strip())] = MappingAction.parse(row["action"])
    return LabelMapping(entries, overrides, version=Path(path).name)


def default_label_mapping() -> LabelMapping:
    """The mapping table bundled with the package."""
    base = resources.files("crisistl") / "data"
    with resources.as_file(base / "label_mapping.csv") as mp, resources.as_file(
        base / "relabel_overrides.csv"
    ) as ov:
        return load_label_mapping(mp, ov)


@dataclass
class MappingResult:
    messages: list[Message]
    discarded: int
    unmapped: list[tuple[str, str]]
    # one (source_dataset, id, rule) row per retained message
    provenance: list[tuple[str, str, str]] = field(default_factory=list)


def apply_label_mapping(raw_rows: Iterable[Mapping], mapping: LabelMapping) -> MappingResult:
    messages: list[Message] = []
    discarded = 0
    unmapped: dict[tuple[str, str], None] = {}
    log: list[tuple[str, str, str]] = []
    for lineno, row in enumerate(raw_rows, start=1):
        ds = str(row["source_dataset"]).strip()
        original = str(row["original_label"])
        rid = str(row.get("id", "")).strip()
        action = mapping.overrides.get((ds, rid))
        if action is not None:
            rule = f"override:{ds}/{rid}"
        else:
            entry = mapping.lookup(ds, original)
            if entry is None:
                unmapped.setdefault((ds, normalize_label(original)), None)
                continue
            action = entry.action
            rule = f"label:{ds}/{normalize_label(entry.original_label)}"
        if action is MappingAction.DISCARD:
            discarded += 1
            continue
        rec = dict(row)
        rec["label"] = action.label.value
        rec["source_dataset"] = ds
        rec["original_label"] = original
        messages.append(message_from_record(rec, lineno))
        log.append((ds, rid, rule))
    return MappingResult(messages, discarded, list(unmapped), log)


# --- taxonomy ---------------------------------------------------------------

TAXONOMY_FIELDS = [
    "event_id", "name", "hazard_type", "hazard_category", "hazard_subcategory",
    "temporal_development", "geographic_spread", "country", "year",
]


@dataclass(frozen=True)
class HazardDefaults:
    hazard_category: HazardCategory
    hazard_subcategory: str
    temporal_development: TemporalDevelopment
    geographic_spread: GeographicSpread


def load_hazard_defaults(path: str | Path | None = None) -> dict[str, HazardDefaults]:
    """Per-hazard-type default dimensions, used to fill taxonomy gaps."""
    if path is None:
        text = (resources.files("crisistl") / "data" / "hazard_defaults.csv").read_text(encoding="utf-8")
    else:
        text = Path(path).read_text(encoding="utf-8")
    out = {}
    for row in csv.DictReader(line for line in text.splitlines() if line and not line.startswith("#")):
        out[row["hazard_type"]] = HazardDefaults(
            HazardCategory(row["hazard_category"]),
            row["hazard_subcategory"],
            TemporalDevelopment(row["temporal_development"]),
            GeographicSpread(row["geographic_spread"]),
        )
    return out


def taxonomy_record(
    event_id: str,
    hazard_type: str,
    *,
    name: str = "",
    country: str = "",
    year: int | None = None,
    defaults: Mapping[str, HazardDefaults] | None = None,
    **overrides,
) -> Event:
    """Build a taxonomy record for an event from its hazard type's defaults."""
    defaults = load_hazard_defaults() if defaults is None else defaults
    hazard_type = hazard_type.strip().lower()
    if hazard_type not in defaults:
        raise CorpusError(f"no taxonomy defaults for hazard type {hazard_type!r}")
    d = defaults[hazard_type]
    ev = Event(
        id=event_id,
        name=name,
        hazard_type=hazard_type,
        hazard_category=d.hazard_category,
        hazard_subcategory=d.hazard_subcategory,
        temporal_development=d.temporal_development,
        geographic_spread=d.geographic_spread,
        country=country,
        year=year,
    )
    return replace(ev, **overrides) if overrides else ev


def load_taxonomy(path: str | Path) -> list[Event]:
    path = Path(path)
    out = []
    if path.suffix == ".jsonl":
        with open(path, encoding="utf-8") as fh:
            for lineno, raw in enumerate(fh, 1):
                if raw.strip():
                    rec = json.loads(raw)
                    rec.setdefault("id", rec.get("event_id"))
                    out.append(event_from_record(rec, lineno))
        return out
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        for rec in reader:
            rec = dict(rec)
            rec.setdefault("id", rec.get("event_id"))
            out.append(event_from_record(rec, reader.line_num))
    return out


def annotate_events(corpus: Corpus, taxonomy: Sequence[Event]) -> Corpus:
    """Replace every corpus event with its taxonomy record. Messages are untouched."""
    table: dict[str, Event] = {}
    for rec in taxonomy:
        if rec.id in table:
            raise CorpusError(f"taxonomy: duplicate record for event {rec.id!r}")
        table[rec.id] = rec
    needed = set(corpus.events) | {m.event_id for m in corpus.messages}
    missing = sorted(needed - table.keys())
    if missing:
        raise CorpusError(f"taxonomy: no record for event(s): {', '.join(missing)}")
    events = {eid: table[eid] for eid in sorted(needed)}
    return replace(corpus, events=events)


# --- merging ----------------------------------------------------------------

def merge_corpora(sources: Sequence[Corpus]) -> Corpus:
    """Union of messages (first ``(source_dataset, id)`` wins) and events.

    Two sources defining the same event id with different fields is an error.
    """
    seen: set[tuple[str, str]] = set()
    messages: list[Message] = []
    events: dict[str, Event] = {}
    provenance: list[str] = []
    for src in sources:
        for eid, ev in src.events.items():
            prior = events.get(eid)
            if prior is not None and prior != ev:
                raise CorpusError(f"event {eid!r} has conflicting taxonomy fields across sources")
            events[eid] = ev
        for m in src.messages:
            if m.key in seen:
                continue
            seen.add(m.key)
            messages.append(m)
        for p in src.provenance:
            if p not in provenance:
                provenance.append(p)
    return Corpus(tuple(messages), dict(sorted(events.items())), tuple(provenance))


def read_raw_rows(path: str | Path) -> list[dict]:
    """Raw source rows from a CSV or JSONL file."""
    path = Path(path)
    if path.suffix.lower() in (".csv", ".tsv"):
        delim = "\t" if path.suffix.lower() == ".tsv" else ","
        with open(path, encoding="utf-8", newline="") as fh:
            return [dict(r) for r in csv.DictReader(fh, delimiter=delim)]
    with open(path, encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]


def corpus_from_rows(result: MappingResult, taxonomy: Sequence[Event]) -> Corpus:
    """Wrap mapped messages into a corpus whose events come from ``taxonomy``."""
    bare = Corpus(tuple(result.messages), {}, tuple(sorted({m.source_dataset for m in result.messages})))
    return annotate_events(bare, taxonomy)
