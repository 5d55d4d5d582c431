"""Candidate sentence crawling for class descriptions.

Two source kinds feed the candidate list: an encyclopedia client returning a
summary paragraph for a query, and a dictionary client returning definitions
per word. Sentences are split, stripped of non-ascii characters, and
deduplicated with order preserved: encyclopedia sentences first, then
dictionary definitions for the full phrase and each word of the query.

Recorded-fixture clients keep every test offline; the live clients are thin
wrappers over public HTTP endpoints and are only exercised by the CLI.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Protocol

from .errors import CrawlError

_SENTENCE_SPLIT = re.compile(r"(?<=[.!?])\s+")

ENCYCLOPEDIA = "encyclopedia"
DICTIONARY = "dictionary"


@dataclass(frozen=True)
class CandidateSentence:
    text: str
    source: str  # ENCYCLOPEDIA or DICTIONARY


@dataclass
class CandidateSet:
    class_id: str
    query: str
    candidates: list[CandidateSentence] = field(default_factory=list)
    fetched_at: str = ""
    empty_warning: bool = False

    def to_dict(self) -> dict:
        return {
            "class_id": self.class_id,
            "query": self.query,
            "fetched_at": self.fetched_at,
            "empty_warning": self.empty_warning,
            "candidates": [{"text": c.text, "source": c.source}
                           for c in self.candidates],
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "CandidateSet":
        return cls(class_id=raw["class_id"], query=raw["query"],
                   fetched_at=raw.get("fetched_at", ""),
                   empty_warning=raw.get("empty_warning", False),
                   candidates=[CandidateSentence(c["text"], c["source"])
                               for c in raw["candidates"]])


def ascii_clean(text: str) -> str:
    """Drop non-ascii characters and collapse whitespace."""
    cleaned = text.encode("ascii", "ignore").decode("ascii")
    return re.sub(r"\s+", " ", cleaned).strip()


def split_sentences(text: str) -> list[str]:
    parts = _SENTENCE_SPLIT.split(text.strip())
    return [p.strip() for p in parts if p.strip()]


class EncyclopediaClient(Protocol):
    def summary(self, query: str) -> str | None: ...


class DictionaryClient(Protocol):
    def definitions(self, word: str) -> list[str]: ...


class FixtureEncyclopedia:
    """Recorded summaries keyed by query; raises nothing, returns None on miss."""

    def __init__(self, fixtures: dict[str, str] | str | Path):
        if not isinstance(fixtures, dict):
            fixtures = json.loads(Path(fixtures).read_text(encoding="utf-8"))
        self._fixtures = fixtures

    def summary(self, query: str) -> str | None:
        return self._fixtures.get(query)


class FixtureDictionary:
    def __init__(self, fixtures: dict[str, list[str]] | str | Path):
        if not isinstance(fixtures, dict):
            fixtures = json.loads(Path(fixtures).read_text(encoding="utf-8"))
        self._fixtures = fixtures

    def definitions(self, word: str) -> list[str]:
        return list(self._fixtures.get(word, []))


class LiveEncyclopedia:
    """Wikipedia REST summary endpoint; page-title fallback is delegated to
    the endpoint's own resolver."""

    URL = "https://en.wikipedia.org/api/rest_v1/page/summary/{}"

    def summary(self, query: str) -> str | None:
        import requests
        try:
            resp = requests.get(self.URL.format(query.replace(" ", "_")),
                                timeout=10)
        except requests.RequestException as exc:
            raise CrawlError(f"encyclopedia unreachable: {exc}") from exc
        if resp.status_code != 200:
            return None
        return resp.json().get("extract")


class LiveDictionary:
    URL = "https://api.dictionaryapi.dev/api/v2/entries/en/{}"

    def definitions(self, word: str) -> list[str]:
        import requests
        try:
            resp = requests.get(self.URL.format(word), timeout=10)
        except requests.RequestException as exc:
            raise CrawlError(f"dictionary unreachable: {exc}") from exc
        if resp.status_code != 200:
            return []
        out = []
        for entry in resp.json():
            for meaning in entry.get("meanings", []):
                for d in meaning.get("definitions", []):
                    if d.get("definition"):
                        out.append(d["definition"])
        return out


def crawl_candidates(class_id: str, class_name: str,
                     encyclopedia: EncyclopediaClient,
                     dictionary: DictionaryClient) -> CandidateSet:
    """Merged candidate list for one class name."""
    candidates: list[CandidateSentence] = []
    seen: set[str] = set()
    errors: list[str] = []

    def add(text: str, source: str) -> None:
        text = ascii_clean(text)
        if text and text not in seen:
            seen.add(text)
            candidates.append(CandidateSentence(text, source))

    try:
        summary = encyclopedia.summary(class_name)
        if summary:
            for sentence in split_sentences(summary):
                add(sentence, ENCYCLOPEDIA)
    except CrawlError as exc:
        errors.append(str(exc))

    try:
        queries = [class_name] + class_name.split()
        for word in queries:
            for definition in dictionary.definitions(word):
                for sentence in split_sentences(definition):
                    add(sentence, DICTIONARY)
    except CrawlError as exc:
        errors.append(str(exc))

    if len(errors) == 2:
        raise CrawlError("all candidate sources unreachable: "
                         + "; ".join(errors))
    return CandidateSet(
        class_id=class_id, query=class_name, candidates=candidates,
        fetched_at=datetime.now(timezone.utc).isoformat(),
        empty_warning=not candidates)
