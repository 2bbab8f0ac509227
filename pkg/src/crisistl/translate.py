"""Translation clients sharing one interface, with a persistent JSONL cache.

Live HTTP translation is always wrapped in :class:`CachedTranslator`, so runs
can be repeated offline against a frozen cache.
"""

from __future__ import annotations

import hashlib
import json
import os
import re
import threading
import urllib.request
from pathlib import Path
from typing import Mapping, Protocol

ENDPOINT_ENV = "CRISISTL_TRANSLATE_URL"


class TranslationError(RuntimeError):
    pass


class TranslationClient(Protocol):
    def translate(self, text: str, source_lang: str, target_lang: str) -> str: ...


def text_hash(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


class TranslationCache:
    """Append-only JSONL store of ``{text_hash, source, target, translation}``."""

    def __init__(self, path: str | Path | None = None):
        self.path = Path(path) if path is not None else None
        self._entries: dict[tuple[str, str, str], str] = {}
        self._lock = threading.Lock()
        if self.path is not None and self.path.exists():
            with open(self.path, encoding="utf-8") as fh:
                for lineno, line in enumerate(fh, 1):
                    if not line.strip():
                        continue
                    try:
                        rec = json.loads(line)
                        key = (rec["text_hash"], rec["source"], rec["target"])
                    except (json.JSONDecodeError, KeyError) as exc:
                        raise TranslationError(f"{self.path}: line {lineno}: bad cache record ({exc})") from None
                    # first response wins
                    self._entries.setdefault(key, rec["translation"])

    def __len__(self) -> int:
        return len(self._entries)

    def get(self, text: str, source: str, target: str) -> str | None:
        return self._entries.get((text_hash(text), source, target))

    def put(self, text: str, source: str, target: str, translation: str) -> str:
        key = (text_hash(text), source, target)
        with self._lock:
            if key in self._entries:
                return self._entries[key]
            self._entries[key] = translation
            if self.path is not None:
                self.path.parent.mkdir(parents=True, exist_ok=True)
                with open(self.path, "a", encoding="utf-8") as fh:
                    rec = {"text_hash": key[0], "source": source, "target": target, "translation": translation}
                    fh.write(json.dumps(rec, ensure_ascii=False) + "\n")
            return translation


class CachedTranslator:
    """Serve from the cache, fall back to ``backend`` and remember its answer.

    With ``backend=None`` the cache is frozen and a miss raises.
    """

    def __init__(self, backend: TranslationClient | None, cache: TranslationCache | str | Path | None = None):
        self.backend = backend
        self.cache = cache if isinstance(cache, TranslationCache) else TranslationCache(cache)

    def translate(self, text: str, source_lang: str, target_lang: str) -> str:
        if source_lang == target_lang:
            return text
        hit = self.cache.get(text, source_lang, target_lang)
        if hit is not None:
            return hit
        if self.backend is None:
            raise TranslationError(
                f"no cached translation {source_lang}->{target_lang} for text hash {text_hash(text)[:12]}"
            )
        return self.cache.put(text, source_lang, target_lang, self.backend.translate(text, source_lang, target_lang))


_WORD = re.compile(r"\w+(?:['’]\w+)*")


class DictionaryTranslator:
    """Word-for-word substitution; unknown words pass through unchanged.

    ``dictionaries`` maps ``(source, target)`` to a lowercase word table.
    Intended as a deterministic stand-in for a real service.
    """

    def __init__(self, dictionaries: Mapping[tuple[str, str], Mapping[str, str]]):
        self.dictionaries = {k: dict(v) for k, v in dictionaries.items()}

    def translate(self, text: str, source_lang: str, target_lang: str) -> str:
        if source_lang == target_lang:
            return text
        table = self.dictionaries.get((source_lang, target_lang), {})

        def sub(m: re.Match) -> str:
            word = m.group()
            return table.get(word.lower(), word)

        return _WORD.sub(sub, text)


class HttpTranslator:
    """Minimal JSON-over-HTTP client.

    POSTs ``{"q", "source", "target"}`` and reads ``{"translation"}``. The
    endpoint defaults to the ``CRISISTL_TRANSLATE_URL`` environment variable.
    """

    def __init__(self, endpoint: str | None = None, timeout: float = 30.0, api_key: str | None = None):
        self.endpoint = endpoint or os.environ.get(ENDPOINT_ENV)
        if not self.endpoint:
            raise TranslationError(f"no translation endpoint configured (set {ENDPOINT_ENV})")
        self.timeout = timeout
        self.api_key = api_key

    def translate(self, text: str, source_lang: str, target_lang: str) -> str:
        body = json.dumps({"q": text, "source": source_lang, "target": target_lang}).encode("utf-8")
        req = urllib.request.Request(self.endpoint, data=body, headers={"Content-Type": "application/json"})
        if self.api_key:
            req.add_header("Authorization", f"Bearer {self.api_key}")
        try:
            with urllib.request.urlopen(req, timeout=self.timeout) as resp:
                payload = json.loads(resp.read().decode("utf-8"))
        except OSError as exc:
            raise TranslationError(f"translation request failed: {exc}") from exc
        if "translation" not in payload:
            raise TranslationError("translation response lacks a 'translation' field")
        return payload["translation"]


def live_translator(cache_path: str | Path, endpoint: str | None = None) -> CachedTranslator:
    return CachedTranslator(HttpTranslator(endpoint), cache_path)
