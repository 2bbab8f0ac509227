"""Transfer-learning scenarios: event-level splits, balancing, test augmentation.

Events are partitioned once per corpus. Within every (language, hazard type)
group, events are ranked by ``n * (1 - |pos_ratio - 0.5| * 2)`` and the top
ones go to training until they hold at least half the group's messages; the
rest are held out. An event held out in any group is held out everywhere, so
the test set of a target is the same for every scenario kind and nothing in
any training pool can reach an augmentation pool.
"""

from __future__ import annotations

import hashlib
import json
import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field, replace
from enum import Enum
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .corpus import Corpus, LabelClass, Message, message_from_record
from .lingfeat import SCHEMA_VERSION
from .translate import TranslationClient

MANIFEST_FORMAT = "crisistl-manifest"
MANIFEST_VERSION = 1
DEFAULT_SOURCE = "en"

LabeledId = tuple[str, LabelClass]


class ScenarioError(ValueError):
    pass


class ScenarioKind(str, Enum):
    MONO_MONO = "MonolingualMonodomain"
    MONO_CROSS = "MonolingualCrossDomain"
    MONO_MULTI = "MonolingualMultiDomain"
    CL_MONO = "CrossLingualMonodomain"
    CL_CROSS = "CrossLingualCrossDomain"
    CL_MULTI = "CrossLingualMultiDomain"
    ML_MULTI = "MultilingualMultiDomain"

    @property
    def cli_name(self) -> str:
        return _CLI_NAMES[self]

    @property
    def cross_lingual(self) -> bool:
        return self in (ScenarioKind.CL_MONO, ScenarioKind.CL_CROSS, ScenarioKind.CL_MULTI, ScenarioKind.ML_MULTI)

    @classmethod
    def parse(cls, value: "str | ScenarioKind") -> "ScenarioKind":
        if isinstance(value, cls):
            return value
        v = str(value).strip()
        for kind in cls:
            if v in (kind.value, kind.name, kind.cli_name) or v.lower() == kind.value.lower():
                return kind
        raise ScenarioError(f"unknown scenario kind {value!r}; expected one of {[k.cli_name for k in cls]}")


_CLI_NAMES = {
    ScenarioKind.MONO_MONO: "monolingual_monodomain",
    ScenarioKind.MONO_CROSS: "monolingual_crossdomain",
    ScenarioKind.MONO_MULTI: "monolingual_multidomain",
    ScenarioKind.CL_MONO: "cross_lingual_monodomain",
    ScenarioKind.CL_CROSS: "cross_lingual_crossdomain",
    ScenarioKind.CL_MULTI: "cross_lingual_multidomain",
    ScenarioKind.ML_MULTI: "multilingual_multidomain",
}


class Origin(str, Enum):
    NATIVE = "Native"
    POOL_NEGATIVE = "PoolNegative"
    TRANSLATED_NEGATIVE = "TranslatedNegative"


@dataclass(frozen=True)
class ScenarioSpec:
    kind: ScenarioKind
    target_language: str
    target_domain: str
    source_language: str = DEFAULT_SOURCE
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "kind", ScenarioKind.parse(self.kind))
        if self.seed < 0:
            raise ScenarioError("seed must be non-negative")
        if self.kind.cross_lingual and self.target_language == self.source_language:
            raise ScenarioError(
                f"{self.kind.value} needs a target language different from the source ({self.source_language})"
            )

    @property
    def label(self) -> str:
        return f"{self.kind.value}/{self.target_language}/{self.target_domain}"

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "target_language": self.target_language,
            "target_domain": self.target_domain,
            "source_language": self.source_language,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioSpec":
        return cls(
            ScenarioKind.parse(d["kind"]),
            d["target_language"],
            d["target_domain"],
            d.get("source_language", DEFAULT_SOURCE),
            int(d.get("seed", 0)),
        )


@dataclass(frozen=True)
class ScenarioDataset:
    spec: ScenarioSpec
    train: tuple[LabeledId, ...]
    test: tuple[LabeledId, ...]
    train_events: frozenset[str]
    test_events: frozenset[str]
    augmentation_log: tuple[tuple[str, Origin], ...] = ()
    shortfall: int = 0
    extra_messages: tuple[Message, ...] = ()

    def label_counts(self, part: str = "train") -> Counter:
        return Counter(label for _, label in getattr(self, part))

    def messages(self, corpus: Corpus, ids: Iterable[str]) -> list[Message]:
        """Resolve ids against the corpus plus the derived (translated) messages."""
        index = corpus.by_id()
        index.update({m.id: m for m in self.extra_messages})
        try:
            return [index[i] for i in ids]
        except KeyError as exc:
            raise ScenarioError(f"message {exc.args[0]!r} not found in corpus") from None

    def test_digest(self) -> str:
        payload = json.dumps([[i, label.value] for i, label in self.test])
        return hashlib.sha256(payload.encode()).hexdigest()


# --- seeds --------------------------------------------------------------------

def derive_seed(*parts) -> int:
    """Stable 63-bit seed from any JSON-serializable parts."""
    digest = hashlib.sha256(json.dumps([str(p) for p in parts]).encode()).digest()
    return int.from_bytes(digest[:8], "big") >> 1


# --- event partition -----------------------------------------------------------

def event_score(n: int, n_pos: int) -> float:
    if n == 0:
        return 0.0
    return n * (1.0 - abs(n_pos / n - 0.5) * 2.0)


@dataclass(frozen=True)
class EventPartition:
    train: frozenset[str]
    test: frozenset[str]
    # (language, event) -> message count, for reporting
    sizes: dict = field(default_factory=dict, compare=False)


def partition_events(corpus: Corpus, train_share: float = 0.5) -> EventPartition:
    groups: dict[tuple[str, str], Counter] = defaultdict(Counter)
    positives: dict[tuple[str, str], Counter] = defaultdict(Counter)
    for m in corpus.messages:
        ev = corpus.events.get(m.event_id)
        if ev is None:
            raise ScenarioError(f"message {m.id!r} references unknown event {m.event_id!r}")
        key = (m.language, ev.hazard_type)
        groups[key][m.event_id] += 1
        positives[key][m.event_id] += m.label is LabelClass.RELATED

    train, test = set(), set()
    sizes = {}
    for key in sorted(groups):
        counts = groups[key]
        ranked = sorted(counts, key=lambda e: (-event_score(counts[e], positives[key][e]), e))
        total = sum(counts.values())
        for e in ranked:
            sizes[(key[0], e)] = counts[e]
        if len(ranked) == 1:
            test.add(ranked[0])
            continue
        taken = 0
        for i, e in enumerate(ranked):
            if i > 0 and (taken >= train_share * total or i == len(ranked) - 1):
                test.update(ranked[i:])
                break
            train.add(e)
            taken += counts[e]
    return EventPartition(frozenset(train - test), frozenset(test), sizes)


def _group_filter(corpus: Corpus, languages: set[str], domains, events: frozenset[str], include: bool) -> list[Message]:
    out = []
    for m in corpus.messages:
        if m.language not in languages:
            continue
        if (m.event_id in events) != include:
            continue
        hz = corpus.events[m.event_id].hazard_type
        if domains(hz):
            out.append(m)
    return out


def training_pool(corpus: Corpus, spec: ScenarioSpec, part: EventPartition) -> list[Message]:
    k, tl, td, sl = spec.kind, spec.target_language, spec.target_domain, spec.source_language
    same = lambda hz: hz == td  # noqa: E731
    other = lambda hz: hz != td  # noqa: E731
    every = lambda hz: True  # noqa: E731
    langs, domains = {
        ScenarioKind.MONO_MONO: ({tl}, same),
        ScenarioKind.MONO_CROSS: ({tl}, other),
        ScenarioKind.MONO_MULTI: ({tl}, every),
        ScenarioKind.CL_MONO: ({sl}, same),
        ScenarioKind.CL_CROSS: ({sl}, other),
        ScenarioKind.CL_MULTI: ({sl}, every),
        ScenarioKind.ML_MULTI: ({sl, tl}, every),
    }[k]
    return _group_filter(corpus, langs, domains, part.test, include=False)


def target_test_messages(corpus: Corpus, spec: ScenarioSpec, part: EventPartition) -> list[Message]:
    return _group_filter(corpus, {spec.target_language}, lambda hz: hz == spec.target_domain, part.test, include=True)


def select_events(
    corpus: Corpus, spec: ScenarioSpec, partition: EventPartition | None = None
) -> tuple[frozenset[str], frozenset[str]]:
    part = partition_events(corpus) if partition is None else partition
    test = target_test_messages(corpus, spec, part)
    if not test:
        raise ScenarioError(f"{spec.label}: target has no held-out event")
    pool = training_pool(corpus, spec, part)
    if not pool:
        raise ScenarioError(f"{spec.label}: no training events satisfy the scenario's source constraints")
    return frozenset(m.event_id for m in pool), frozenset(m.event_id for m in test)


# --- balancing -------------------------------------------------------------------

def balance_training_set(train: Sequence[LabeledId], seed: int) -> list[LabeledId]:
    """Meet at floor((P+N)/2) per class: subsample the larger class, oversample the smaller.

    The smaller class keeps every item once and adds draws with replacement.
    """
    pos = [t for t in train if t[1] is LabelClass.RELATED]
    neg = [t for t in train if t[1] is not LabelClass.RELATED]
    if not pos or not neg:
        raise ScenarioError(f"cannot balance: {len(pos)} Related and {len(neg)} NotRelated items")
    target = (len(pos) + len(neg)) // 2
    rng = np.random.default_rng(seed)

    def resize(items: list[LabeledId]) -> list[LabeledId]:
        if len(items) >= target:
            idx = np.sort(rng.choice(len(items), size=target, replace=False))
            return [items[i] for i in idx]
        extra = rng.integers(0, len(items), size=target - len(items))
        return items + [items[i] for i in extra]

    out = resize(pos) + resize(neg)
    return [out[i] for i in rng.permutation(len(out))]


# --- test augmentation ----------------------------------------------------------

def negatives_needed(n_pos: int, n_neg: int, target_ratio: float) -> int:
    """Smallest k with (n_neg + k) / (n_pos + n_neg + k) >= target_ratio."""
    r = Fraction(target_ratio).limit_denominator(10**9)
    if not 0 < r < 1:
        raise ScenarioError(f"target_ratio must lie in (0, 1), got {target_ratio}")
    k = (r * n_pos - (1 - r) * n_neg) / (1 - r)
    return max(0, math.ceil(k))


def translated_id(message_id: str, target_language: str) -> str:
    return f"{message_id}@{target_language}"


def augment_test_negatives(
    test: Sequence[LabeledId],
    pool: Sequence[Message],
    translator: TranslationClient | None,
    target_ratio: float = 0.5,
    seed: int = 0,
    target_language: str | None = None,
    foreign_pool: Sequence[Message] = (),
) -> tuple[list[LabeledId], list[tuple[str, Origin]], list[Message], int]:
    """Add NotRelated items until the test set reaches ``target_ratio``.

    ``pool`` holds same-language negatives and is used first. ``foreign_pool``
    holds pivot-language negatives that are translated into
    ``target_language`` only once ``pool`` runs dry. Returns the augmented
    list, the log of added ids, the derived translated messages and the
    remaining shortfall.
    """
    if not 0 < target_ratio <= 0.5:
        raise ScenarioError(f"target_ratio must lie in (0, 0.5], got {target_ratio}")
    out = list(test)
    n_pos = sum(label is LabelClass.RELATED for _, label in out)
    need = negatives_needed(n_pos, len(out) - n_pos, target_ratio)
    log: list[tuple[str, Origin]] = []
    derived: list[Message] = []
    if need == 0:
        return out, log, derived, 0

    rng = np.random.default_rng(seed)
    present = {i for i, _ in out}
    local = [m for m in pool if m.label is LabelClass.NOT_RELATED and m.id not in present]
    for i in rng.permutation(len(local))[:need]:
        m = local[i]
        out.append((m.id, LabelClass.NOT_RELATED))
        log.append((m.id, Origin.POOL_NEGATIVE))
    need -= len(log)

    if need > 0 and translator is not None and target_language is not None:
        foreign = [m for m in foreign_pool if m.label is LabelClass.NOT_RELATED and m.language != target_language]
        for i in rng.permutation(len(foreign))[:need]:
            m = foreign[i]
            new = replace(
                m,
                id=translated_id(m.id, target_language),
                text=translator.translate(m.text, m.language, target_language),
                language=target_language,
                translated_text=m.text,
            )
            derived.append(new)
            out.append((new.id, LabelClass.NOT_RELATED))
            log.append((new.id, Origin.TRANSLATED_NEGATIVE))
            need -= 1
    return out, log, derived, need


# --- scenario construction ---------------------------------------------------

def build_scenario(
    corpus: Corpus,
    spec: ScenarioSpec,
    translator: TranslationClient | None = None,
    target_ratio: float = 0.5,
    balance_seed: int | None = None,
    partition: EventPartition | None = None,
) -> ScenarioDataset:
    """Build the train/test split for ``spec``.

    The test set depends only on the corpus, the target and ``spec.seed``;
    ``balance_seed`` (default derived from ``spec.seed``) only affects training
    resampling, so repeated runs can reseed it without moving the test set.
    """
    part = partition_events(corpus) if partition is None else partition
    train_events, test_events = select_events(corpus, spec, part)
    pool = training_pool(corpus, spec, part)
    raw_train = [(m.id, m.label) for m in pool]
    if balance_seed is None:
        balance_seed = derive_seed(spec.seed, "balance", spec.kind.value, spec.target_language, spec.target_domain)
    try:
        train = balance_training_set(raw_train, balance_seed)
    except ScenarioError as exc:
        raise ScenarioError(f"{spec.label}: {exc}") from None

    native = [(m.id, m.label) for m in target_test_messages(corpus, spec, part)]
    held_out = [m for m in corpus.messages if m.event_id in part.test]
    same_lang = [m for m in held_out if m.language == spec.target_language]
    foreign = [m for m in held_out if m.language == spec.source_language]
    aug_seed = derive_seed(spec.seed, "augment", spec.target_language, spec.target_domain)
    test, log, derived, shortfall = augment_test_negatives(
        native, same_lang, translator, target_ratio, aug_seed, spec.target_language, foreign
    )
    return ScenarioDataset(
        spec, tuple(train), tuple(test), train_events, test_events, tuple(log), shortfall, tuple(derived)
    )


# --- manifests --------------------------------------------------------------

def manifest_dict(ds: ScenarioDataset, corpus_hash: str) -> dict:
    return {
        "format": MANIFEST_FORMAT,
        "format_version": MANIFEST_VERSION,
        "corpus_hash": corpus_hash,
        "lf_schema_version": SCHEMA_VERSION,
        "spec": ds.spec.to_dict(),
        "train": [[i, label.value] for i, label in ds.train],
        "test": [[i, label.value] for i, label in ds.test],
        "train_events": sorted(ds.train_events),
        "test_events": sorted(ds.test_events),
        "augmentation_log": [[i, origin.value] for i, origin in ds.augmentation_log],
        "shortfall": ds.shortfall,
        "extra_messages": [m.to_record() for m in ds.extra_messages],
    }


def export_manifest(ds: ScenarioDataset, path: str | Path, corpus: Corpus | str) -> None:
    """Write a manifest; ``corpus`` may be the corpus itself or its content hash."""
    h = corpus if isinstance(corpus, str) else corpus.content_hash()
    Path(path).write_text(json.dumps(manifest_dict(ds, h), indent=1, ensure_ascii=False) + "\n", encoding="utf-8")


def import_manifest(path: str | Path, corpus: Corpus, check_ids: bool = True) -> ScenarioDataset:
    try:
        d = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path}: not a valid manifest ({exc})") from None
    if d.get("format") != MANIFEST_FORMAT or d.get("format_version") != MANIFEST_VERSION:
        raise ScenarioError(f"{path}: unsupported manifest format")
    actual = corpus.content_hash()
    if d["corpus_hash"] != actual:
        raise ScenarioError(
            f"{path}: corpus hash mismatch (manifest {d['corpus_hash'][:12]}, corpus {actual[:12]})"
        )
    extra = tuple(message_from_record(r) for r in d.get("extra_messages", []))
    ds = ScenarioDataset(
        ScenarioSpec.from_dict(d["spec"]),
        tuple((i, LabelClass(label)) for i, label in d["train"]),
        tuple((i, LabelClass(label)) for i, label in d["test"]),
        frozenset(d["train_events"]),
        frozenset(d["test_events"]),
        tuple((i, Origin(o)) for i, o in d.get("augmentation_log", [])),
        int(d.get("shortfall", 0)),
        extra,
    )
    if check_ids:
        ds.messages(corpus, [i for i, _ in ds.train + ds.test])
    return ds
