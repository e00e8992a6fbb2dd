"""Corpus ingestion: collection filters, text normalization, and the canonical post store.

The store is a UTF-8 line-delimited file, one record per line with fields
``id, text, lang, created_at, place_country, author_ref``, sorted by
(created_at, id) so repeated ingests produce byte-identical files.
"""

from __future__ import annotations

import functools
import json
import logging
import os
import re
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Iterator, Mapping, Sequence

import yaml

log = logging.getLogger(__name__)

CORPUS_FIELDS = ("id", "text", "lang", "created_at", "place_country", "author_ref")

URL_RE = re.compile(r"(?:https?://|www\.)\S+", re.IGNORECASE)
MENTION_RE = re.compile(r"@\w+", re.UNICODE)
WS_RE = re.compile(r"\s+")


class RecordError(ValueError):
    """A raw record that cannot become a valid post (bad JSON, empty text, bad timestamp)."""


class StoreError(OSError):
    """The corpus store could not be read or written."""


def parse_timestamp(value: str) -> datetime:
    """Parse an ISO-8601 UTC timestamp, truncated to second resolution."""
    if not isinstance(value, str) or not value:
        raise RecordError(f"missing or non-string timestamp: {value!r}")
    text = value.strip()
    if text.endswith("Z"):
        text = text[:-1] + "+00:00"
    try:
        dt = datetime.fromisoformat(text)
    except ValueError as exc:
        raise RecordError(f"malformed timestamp {value!r}: {exc}") from None
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.astimezone(timezone.utc).replace(microsecond=0)


def format_timestamp(dt: datetime) -> str:
    return dt.astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


@dataclass(frozen=True)
class Post:
    """One ingested social-media message, already normalized."""

    id: str
    text: str
    lang: str
    created_at: datetime
    place_country: str | None = None
    author_ref: str = ""

    def __post_init__(self):
        if not self.id:
            raise RecordError("post id must be nonempty")
        if not self.text:
            raise RecordError(f"post {self.id}: text empty after normalization")
        if not self.lang:
            raise RecordError(f"post {self.id}: missing language code")
        if self.created_at.tzinfo is None:
            raise RecordError(f"post {self.id}: naive timestamp")

    @property
    def day(self) -> str:
        """UTC calendar day, used for ingest statistics."""
        return self.created_at.astimezone(timezone.utc).date().isoformat()


@dataclass(frozen=True)
class IngestQuery:
    """Collection filters: per-language search terms, language set, country, time window."""

    search_terms: Mapping[str, tuple[str, ...]]
    allowed_langs: frozenset[str]
    allowed_country: str
    window_start: datetime
    window_end: datetime
    accept_missing_place: bool = False

    def __post_init__(self):
        if not self.allowed_langs:
            raise ValueError("allowed_langs must be nonempty")
        if not self.window_start < self.window_end:
            raise ValueError("window_start must precede window_end")
        terms = self.all_terms()
        if not terms:
            raise ValueError("query needs at least one search term")
        if any(not t for t in terms):
            raise ValueError("search terms must be nonempty")

    def all_terms(self) -> tuple[str, ...]:
        """Case-folded terms across all languages, deduplicated, in stable order."""
        seen: dict[str, None] = {}
        for lang in sorted(self.search_terms):
            for term in self.search_terms[lang]:
                seen.setdefault(term.casefold(), None)
        return tuple(seen)


@functools.lru_cache(maxsize=32)
def _term_pattern(terms: tuple[str, ...]) -> re.Pattern:
    # Terms must sit on token boundaries: "corona" matches "corona!" but not
    # "coronavirus". Lookarounds instead of \b so terms may start or end with
    # punctuation.
    alternation = "|".join(re.escape(t) for t in terms)
    return re.compile(rf"(?<!\w)(?:{alternation})(?!\w)", re.UNICODE)


def normalize_text(raw: str) -> str:
    """Canonical post text: URLs -> HTTPURL, mentions -> @USER, whitespace collapsed.

    Total and idempotent; emoji and casing are preserved.
    """
    text = URL_RE.sub("HTTPURL", raw)
    text = MENTION_RE.sub("@USER", text)
    return WS_RE.sub(" ", text).strip()


def match_filters(post: Post, query: IngestQuery) -> bool:
    """Collection filter: term match, language, location, and time window.

    The window is half-open [window_start, window_end). Posts without a
    place_country pass only when the query permits them.
    """
    if post.lang not in query.allowed_langs:
        return False
    if post.place_country is None:
        if not query.accept_missing_place:
            return False
    elif post.place_country != query.allowed_country:
        return False
    if not query.window_start <= post.created_at < query.window_end:
        return False
    return bool(_term_pattern(query.all_terms()).search(post.text.casefold()))


def post_from_record(record: Mapping) -> Post:
    """Build a normalized Post from a raw source record."""
    if not isinstance(record, Mapping):
        raise RecordError(f"record is not an object: {record!r}")
    missing = [k for k in ("id", "text", "lang", "created_at") if k not in record]
    if missing:
        raise RecordError(f"record missing fields {missing}: {record!r}")
    place = record.get("place_country")
    return Post(
        id=str(record["id"]),
        text=normalize_text(str(record["text"])),
        lang=str(record["lang"]).strip().lower(),
        created_at=parse_timestamp(record["created_at"]),
        place_country=str(place).strip().upper() if place else None,
        author_ref=str(record.get("author_ref") or ""),
    )


def post_to_record(post: Post) -> dict:
    return {
        "id": post.id,
        "text": post.text,
        "lang": post.lang,
        "created_at": format_timestamp(post.created_at),
        "place_country": post.place_country,
        "author_ref": post.author_ref,
    }


@dataclass
class CorpusStats:
    """Aggregate counts over a stored corpus; per_day and per_lang always sum to total."""

    total: int = 0
    per_day: dict[str, int] = field(default_factory=dict)
    per_lang: dict[str, int] = field(default_factory=dict)

    def check(self) -> None:
        if sum(self.per_day.values()) != self.total:
            raise AssertionError("per_day counts do not sum to total")
        if sum(self.per_lang.values()) != self.total:
            raise AssertionError("per_lang counts do not sum to total")


def corpus_stats(posts: Iterable[Post]) -> CorpusStats:
    stats = CorpusStats()
    for post in posts:
        stats.total += 1
        stats.per_day[post.day] = stats.per_day.get(post.day, 0) + 1
        stats.per_lang[post.lang] = stats.per_lang.get(post.lang, 0) + 1
    stats.check()
    return stats


class CorpusStore:
    """Canonical corpus file: line-delimited records sorted by (created_at, id)."""

    def __init__(self, path: str | Path):
        self.path = Path(path)

    def exists(self) -> bool:
        return self.path.exists()

    def read(self) -> list[Post]:
        if not self.path.exists():
            return []
        posts = []
        try:
            with open(self.path, encoding="utf-8") as fh:
                for lineno, line in enumerate(fh, 1):
                    if not line.strip():
                        continue
                    try:
                        posts.append(post_from_record(json.loads(line)))
                    except (json.JSONDecodeError, RecordError) as exc:
                        raise StoreError(f"{self.path}:{lineno}: {exc}") from exc
        except OSError as exc:
            raise StoreError(f"cannot read corpus store {self.path}: {exc}") from exc
        return posts

    def write(self, posts: Iterable[Post]) -> None:
        """Atomically replace the store with the canonical serialization."""
        ordered = sorted(posts, key=lambda p: (p.created_at, p.id))
        tmp = self.path.with_suffix(self.path.suffix + ".tmp")
        try:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with open(tmp, "w", encoding="utf-8") as fh:
                for post in ordered:
                    fh.write(json.dumps(post_to_record(post), ensure_ascii=False))
                    fh.write("\n")
            os.replace(tmp, self.path)
        except OSError as exc:
            try:
                tmp.unlink(missing_ok=True)
            except OSError:
                pass
            raise StoreError(f"cannot write corpus store {self.path}: {exc}") from exc


def read_source(paths: Sequence[str | Path]) -> Iterator[dict | RecordError]:
    """Yield raw records from line-delimited files; malformed lines yield RecordError."""
    for path in paths:
        try:
            fh = open(path, encoding="utf-8")
        except OSError as exc:
            yield RecordError(f"cannot open source {path}: {exc}")
            continue
        with fh:
            for lineno, line in enumerate(fh, 1):
                if not line.strip():
                    continue
                try:
                    yield json.loads(line)
                except json.JSONDecodeError as exc:
                    yield RecordError(f"{path}:{lineno}: invalid record: {exc}")


def ingest(
    source: Iterable[Mapping | RecordError],
    query: IngestQuery,
    store: CorpusStore,
    checkpoint_every: int = 5000,
) -> CorpusStats:
    """Filter a raw record stream into the store; returns stats over the stored set.

    Re-running over the same source is idempotent: accepted posts merge with the
    existing store, duplicates keep the earliest created_at, and the canonical
    sort makes the result byte-identical. The store is flushed every
    `checkpoint_every` accepted records so an aborted run leaves a valid
    partial-progress checkpoint.
    """
    merged: dict[str, Post] = {p.id: p for p in store.read()}
    skipped = 0
    accepted_since_flush = 0
    for raw in source:
        if isinstance(raw, RecordError):
            skipped += 1
            log.warning("skipping unreadable record: %s", raw)
            continue
        try:
            post = post_from_record(raw)
        except RecordError as exc:
            skipped += 1
            log.warning("rejecting record: %s", exc)
            continue
        if not match_filters(post, query):
            continue
        current = merged.get(post.id)
        if current is None or post.created_at < current.created_at:
            merged[post.id] = post
        accepted_since_flush += 1
        if accepted_since_flush >= checkpoint_every:
            store.write(merged.values())
            accepted_since_flush = 0
    store.write(merged.values())
    if skipped:
        log.warning("ingest skipped %d unreadable record(s)", skipped)
    stats = corpus_stats(store.read())
    return stats


def dedupe(store: CorpusStore) -> int:
    """Drop records sharing an id, keeping the earliest created_at; returns removed count."""
    posts = store.read()
    kept: dict[str, Post] = {}
    for post in posts:
        current = kept.get(post.id)
        if current is None or post.created_at < current.created_at:
            kept[post.id] = post
    removed = len(posts) - len(kept)
    if removed:
        store.write(kept.values())
    return removed


def load_query_config(path: str | Path) -> IngestQuery:
    """Read the human-editable query config (terms per language, langs, country, window)."""
    with open(path, encoding="utf-8") as fh:
        raw = yaml.safe_load(fh) or {}
    data = raw.get("query", raw)
    try:
        terms = {
            str(lang): tuple(str(t).casefold() for t in ts)
            for lang, ts in (data["search_terms"] or {}).items()
        }
        window = data["window"]
        return IngestQuery(
            search_terms=terms,
            allowed_langs=frozenset(str(l).lower() for l in data["allowed_langs"]),
            allowed_country=str(data["allowed_country"]).upper(),
            window_start=parse_timestamp(str(window["start"])),
            window_end=parse_timestamp(str(window["end"])),
            accept_missing_place=bool(data.get("accept_missing_place", False)),
        )
    except (KeyError, TypeError) as exc:
        raise ValueError(f"query config {path} is missing required fields: {exc}") from exc
