"""Small multilingual crisis corpus plus toy resources for every representation.

Everything is generated from a seed: a 3-language, 3-domain corpus of templated
messages, aligned word tables, a 100-d pivot table, pooled contextual vectors
and a frozen translation cache. Words that translate into each other share a
concept vector, so the aligned tables behave like real aligned embeddings.
"""

from __future__ import annotations

import json
import zlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .corpus import Corpus, Event, LabelClass, Message, save_corpus
from .embed import CONTEXTUAL, ContextualCache, Representation, Resources, VectorTable, save_contextual_cache, save_word_vectors
from .scenario import ScenarioKind, translated_id
from .tokenize import PLACEHOLDERS, Normalization, tokenize
from .translate import CachedTranslator, DictionaryTranslator, TranslationCache
from .unify import load_hazard_defaults, taxonomy_record

LANGUAGES = ("en", "es", "it")
DOMAINS = ("earthquake", "flood", "explosion")

# concept -> (en, es, it)
_LEXICON = {
    "hazard:earthquake": [
        ("earthquake", "terremoto", "terremoto"), ("quake", "sismo", "sisma"), ("shaking", "temblor", "scossa"),
        ("magnitude", "magnitud", "magnitudo"), ("aftershock", "réplica", "replica"),
    ],
    "hazard:flood": [
        ("flood", "inundación", "alluvione"), ("water", "agua", "acqua"), ("river", "río", "fiume"),
        ("rain", "lluvia", "pioggia"), ("flooding", "crecida", "esondazione"),
    ],
    "hazard:explosion": [
        ("explosion", "explosión", "esplosione"), ("blast", "estallido", "scoppio"), ("fire", "incendio", "incendio"),
        ("factory", "fábrica", "fabbrica"), ("smoke", "humo", "fumo"),
    ],
    "crisis": [
        ("help", "ayuda", "aiuto"), ("victims", "víctimas", "vittime"), ("rescue", "rescate", "soccorso"),
        ("damage", "daños", "danni"), ("injured", "heridos", "feriti"), ("evacuated", "evacuados", "evacuati"),
        ("emergency", "emergencia", "emergenza"), ("dead", "muertos", "morti"),
    ],
    "chatter": [
        ("football", "fútbol", "calcio"), ("match", "partido", "partita"), ("coffee", "café", "caffè"),
        ("music", "música", "musica"), ("movie", "película", "film"), ("birthday", "cumpleaños", "compleanno"),
        ("weekend", "finde", "weekend"), ("friends", "amigos", "amici"), ("pizza", "pizza", "pizza"),
        ("game", "juego", "gioco"), ("love", "amor", "amore"), ("happy", "feliz", "felice"),
    ],
    "function": [
        ("the", "el", "il"), ("a", "un", "un"), ("in", "en", "in"), ("near", "cerca", "vicino"),
        ("we", "nosotros", "noi"), ("our", "nuestro", "nostro"), ("is", "es", "è"), ("today", "hoy", "oggi"),
    ],
}


@dataclass(frozen=True)
class SyntheticConfig:
    seed: int = 0
    events_per_group: int = 2
    # message counts of the 1st, 2nd, ... event in each (language, domain) group
    event_sizes: tuple[int, ...] = (24, 16)
    # Related share of the 1st, 2nd, ... event
    related_shares: tuple[float, ...] = (0.55, 0.8)


def vocabulary(lang: str) -> dict[str, str]:
    """word -> concept key, for one language."""
    li = LANGUAGES.index(lang)
    out = {}
    for concept, entries in _LEXICON.items():
        for j, words in enumerate(entries):
            out.setdefault(words[li], f"{concept}#{j}")
    return out


def dictionaries() -> dict[tuple[str, str], dict[str, str]]:
    out = {}
    for s, src in enumerate(LANGUAGES):
        for t, tgt in enumerate(LANGUAGES):
            if s != t:
                table = {}
                for entries in _LEXICON.values():
                    for words in entries:
                        table.setdefault(words[s], words[t])
                out[(src, tgt)] = table
    return out


def _stable(*parts) -> int:
    return zlib.crc32("|".join(map(str, parts)).encode())


def _concept_vector(concept: str, dims: int, space: str, seed: int) -> np.ndarray:
    rng = np.random.default_rng([seed, _stable(space, concept)])
    return rng.normal(0.0, 1.0, dims)


def _event_id(lang: str, domain: str, k: int) -> str:
    return f"{lang}_{domain}_{k + 1}"


def make_corpus(cfg: SyntheticConfig = SyntheticConfig()) -> Corpus:
    rng = np.random.default_rng(cfg.seed)
    defaults = load_hazard_defaults()
    translator = DictionaryTranslator(dictionaries())
    events: dict[str, Event] = {}
    messages: list[Message] = []
    for li, lang in enumerate(LANGUAGES):
        words = {c: [w[li] for w in entries] for c, entries in _LEXICON.items()}
        for domain in DOMAINS:
            for k in range(cfg.events_per_group):
                eid = _event_id(lang, domain, k)
                events[eid] = taxonomy_record(
                    eid, domain, defaults=defaults, name=f"{domain} {lang} {k + 1}", country=lang.upper(), year=2012 + k
                )
                size = cfg.event_sizes[k % len(cfg.event_sizes)]
                share = cfg.related_shares[k % len(cfg.related_shares)]
                n_rel = round(size * share)
                labels = [True] * n_rel + [False] * (size - n_rel)
                for j, related in enumerate(labels):
                    if related:
                        body = list(rng.choice(words[f"hazard:{domain}"], rng.integers(1, 4))) + list(
                            rng.choice(words["crisis"], rng.integers(1, 4))
                        )
                    else:
                        body = list(rng.choice(words["chatter"], rng.integers(2, 5)))
                    body += list(rng.choice(words["function"], rng.integers(1, 4)))
                    body = [str(w) for w in rng.permutation(body)]
                    if rng.random() < 0.3:
                        body.append("#" + (domain if related else "fun"))
                    if rng.random() < 0.2:
                        body.append("http://t.co/x" + str(j))
                    text = " ".join(body)
                    if rng.random() < 0.3:
                        text = text.capitalize() + "!"
                    messages.append(
                        Message(
                            id=f"{eid}_{j:03d}",
                            text=text,
                            language=lang,
                            event_id=eid,
                            label=LabelClass.RELATED if related else LabelClass.NOT_RELATED,
                            source_dataset="Synthetic",
                            original_label="related" if related else "not related",
                            translated_text=None if lang == "en" else translator.translate(text, lang, "en"),
                            has_location_meta=bool(rng.random() < 0.2),
                            has_media_meta=bool(rng.random() < 0.2),
                        )
                    )
    # interleave so corpus order does not follow the event layout
    order = rng.permutation(len(messages))
    return Corpus(tuple(messages[i] for i in order), events, ("Synthetic",))


def glove_table(seed: int = 0) -> VectorTable:
    entries = {w: _concept_vector(c, 100, "glove", seed) for w, c in vocabulary("en").items()}
    for p in sorted(PLACEHOLDERS):
        entries[p] = _concept_vector(p, 100, "glove", seed)
    return VectorTable.from_dict("glove-synthetic", entries, 100)


def muse_tables(seed: int = 0) -> dict[str, VectorTable]:
    out = {}
    for lang in LANGUAGES:
        entries = {}
        for w, c in vocabulary(lang).items():
            noise = np.random.default_rng([seed, _stable("muse-noise", lang, w)]).normal(0, 0.05, 300)
            entries[w] = _concept_vector(c, 300, "muse", seed) + noise
        out[lang] = VectorTable.from_dict(f"muse-{lang}", entries, 300)
    return out


def _contextual_vector(text: str, lang: str, rep: Representation, msg_id: str, seed: int) -> np.ndarray:
    vocab = vocabulary(lang)
    toks = [t for t in tokenize(text, Normalization.PLACEHOLDERED) if t in vocab]
    rng = np.random.default_rng([seed, _stable(rep.value, msg_id)])
    v = rng.normal(0, 0.1, 768)
    if toks:
        v += np.mean([_concept_vector(vocab[t], 768, rep.value, seed) for t in toks], axis=0)
    return np.round(v, 5)


def contextual_caches(corpus: Corpus, seed: int = 0) -> dict[Representation, ContextualCache]:
    """Pooled vectors for every message and for every translated pivot message."""
    translator = DictionaryTranslator(dictionaries())
    out = {}
    for rep in CONTEXTUAL:
        entries = {}
        for m in corpus.messages:
            text, lang = (m.translated_text or m.text, "en") if rep is Representation.MT_BERT else (m.text, m.language)
            entries[m.id] = _contextual_vector(text, lang, rep, m.id, seed)
            if m.language == "en":
                for tgt in LANGUAGES[1:]:
                    tid = translated_id(m.id, tgt)
                    if rep is Representation.MT_BERT:
                        entries[tid] = _contextual_vector(m.text, "en", rep, tid, seed)
                    else:
                        entries[tid] = _contextual_vector(translator.translate(m.text, "en", tgt), tgt, rep, tid, seed)
        out[rep] = ContextualCache(f"{rep.value}-synthetic", 768, entries)
    return out


def translation_cache(corpus: Corpus, path: str | Path | None = None) -> TranslationCache:
    """Pivot-to-target translations of every English message, as a frozen cache."""
    translator = DictionaryTranslator(dictionaries())
    cache = TranslationCache(path)
    for m in corpus.messages:
        if m.language == "en":
            for tgt in LANGUAGES[1:]:
                cache.put(m.text, "en", tgt, translator.translate(m.text, "en", tgt))
    return cache


def make_resources(corpus: Corpus, seed: int = 0) -> Resources:
    return Resources(
        glove=glove_table(seed),
        muse=muse_tables(seed),
        caches=contextual_caches(corpus, seed),
        translator=CachedTranslator(None, translation_cache(corpus)),
    )


def write_fixture(out_dir: str | Path, cfg: SyntheticConfig = SyntheticConfig(), n_trees: int = 10) -> Path:
    """Write corpus, resources and a run-matrix config; returns the config path."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    corpus = make_corpus(cfg)
    save_corpus(corpus, out / "corpus.jsonl")
    save_word_vectors(glove_table(cfg.seed), out / "glove.100d.txt")
    muse = {}
    for lang, table in muse_tables(cfg.seed).items():
        save_word_vectors(table, out / f"muse.{lang}.txt")
        muse[lang] = f"muse.{lang}.txt"
    caches = {}
    for rep, cache in contextual_caches(corpus, cfg.seed).items():
        name = f"cache.{rep.value}.jsonl"
        save_contextual_cache(cache, out / name)
        caches[rep.value] = name
    tpath = out / "translations.jsonl"
    if tpath.exists():
        tpath.unlink()
    translation_cache(corpus, tpath)
    config = {
        "corpus": "corpus.jsonl",
        "resources": {
            "glove": "glove.100d.txt",
            "muse": muse,
            "contextual": caches,
            "translation_cache": "translations.jsonl",
        },
        "grid": {
            "kinds": [k.cli_name for k in ScenarioKind],
            "targets": [["es", "earthquake"]],
            "representations": [r.value for r in Representation],
        },
        "repeats": 2,
        "seed": cfg.seed,
        "n_trees": n_trees,
        "out": "reports",
    }
    path = out / "config.json"
    path.write_text(json.dumps(config, indent=1) + "\n", encoding="utf-8")
    return path
