"""Labeling rounds: record storage with audit trail, batches, agreement, gold resolution."""

from __future__ import annotations

import json
import random
import threading
from dataclasses import dataclass
from datetime import datetime
from itertools import combinations
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence

from .codebook import AXIS_GOVERNMENT, AXIS_MEASURE, AXIS_RELEVANCE, AXIS_TOPIC, Codebook, Violation
from .corpus import Post, format_timestamp, parse_timestamp

LABEL_AXES = (AXIS_TOPIC, AXIS_MEASURE, AXIS_GOVERNMENT, AXIS_RELEVANCE)

# A prefilter is a scoring function over posts plus the minimum score to keep.
Prefilter = tuple[Callable[[Sequence[Post]], Sequence[float]], float]


class LabelValidationError(ValueError):
    def __init__(self, violations: Sequence[Violation]):
        super().__init__("; ".join(f"{v.axis}: {v.message}" for v in violations))
        self.violations = list(violations)


class UnknownPostError(KeyError):
    pass


class ResolutionError(ValueError):
    pass


@dataclass(frozen=True)
class LabelRecord:
    """One annotator's judgment of one post along the four codebook axes."""

    post_id: str
    annotator_id: str
    round: int
    topic: str | None
    measure_support: str
    government_support: str
    relevance: str
    labeled_at: datetime

    def __post_init__(self):
        if self.round < 1:
            raise ValueError("round must be >= 1")

    @property
    def key(self) -> tuple[str, str, int]:
        return (self.post_id, self.annotator_id, self.round)

    def values(self) -> dict[str, str | None]:
        return {
            AXIS_TOPIC: self.topic,
            AXIS_MEASURE: self.measure_support,
            AXIS_GOVERNMENT: self.government_support,
            AXIS_RELEVANCE: self.relevance,
        }

    def to_record(self) -> dict:
        rec = {"post_id": self.post_id, "annotator_id": self.annotator_id, "round": self.round}
        rec.update(self.values())
        rec["labeled_at"] = format_timestamp(self.labeled_at)
        return rec

    @classmethod
    def from_record(cls, rec: Mapping) -> "LabelRecord":
        return cls(
            post_id=str(rec["post_id"]),
            annotator_id=str(rec["annotator_id"]),
            round=int(rec["round"]),
            topic=rec.get(AXIS_TOPIC),
            measure_support=rec[AXIS_MEASURE],
            government_support=rec[AXIS_GOVERNMENT],
            relevance=rec[AXIS_RELEVANCE],
            labeled_at=parse_timestamp(rec["labeled_at"]),
        )


@dataclass(frozen=True)
class GoldLabel:
    """Resolved authoritative label for one post."""

    post_id: str
    topic: str | None
    measure_support: str
    government_support: str
    relevance: str
    provenance: str  # "unanimous" | "resolved"
    resolver_id: str | None = None

    def values(self) -> dict[str, str | None]:
        return {
            AXIS_TOPIC: self.topic,
            AXIS_MEASURE: self.measure_support,
            AXIS_GOVERNMENT: self.government_support,
            AXIS_RELEVANCE: self.relevance,
        }

    def to_record(self) -> dict:
        rec = {"post_id": self.post_id}
        rec.update(self.values())
        rec["provenance"] = self.provenance
        rec["resolver_id"] = self.resolver_id
        return rec

    @classmethod
    def from_record(cls, rec: Mapping) -> "GoldLabel":
        return cls(
            post_id=str(rec["post_id"]),
            topic=rec.get(AXIS_TOPIC),
            measure_support=rec[AXIS_MEASURE],
            government_support=rec[AXIS_GOVERNMENT],
            relevance=rec[AXIS_RELEVANCE],
            provenance=rec["provenance"],
            resolver_id=rec.get("resolver_id"),
        )


class _JsonlLog:
    """Append-only line-delimited log; the live view is the last entry per key."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._lock = threading.Lock()
        self._count: int | None = None

    def _current_count(self) -> int:
        if self._count is None:
            if self.path.exists():
                with open(self.path, encoding="utf-8") as fh:
                    self._count = sum(1 for line in fh if line.strip())
            else:
                self._count = 0
        return self._count

    def append(self, record: dict) -> int:
        return self.extend([record])

    def extend(self, records: Sequence[dict]) -> int:
        """Append records in one write; returns the sequence number of the last one."""
        with self._lock:
            count = self._current_count()
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with open(self.path, "a", encoding="utf-8") as fh:
                for record in records:
                    fh.write(json.dumps(record, ensure_ascii=False))
                    fh.write("\n")
            self._count = count + len(records)
            return self._count

    def records(self) -> list[dict]:
        if not self.path.exists():
            return []
        with open(self.path, encoding="utf-8") as fh:
            return [json.loads(line) for line in fh if line.strip()]


class LabelStore:
    """Label records with full audit trail; writes serialize per (post, annotator, round)."""

    def __init__(self, path: str | Path):
        self._log = _JsonlLog(path)

    @property
    def path(self) -> Path:
        return self._log.path

    def append(self, record: LabelRecord) -> int:
        return self._log.append(record.to_record())

    def extend(self, records: Sequence[LabelRecord]) -> int:
        return self._log.extend([r.to_record() for r in records])

    def all_records(self) -> list[LabelRecord]:
        return [LabelRecord.from_record(r) for r in self._log.records()]

    def live(self) -> dict[tuple[str, str, int], LabelRecord]:
        state: dict[tuple[str, str, int], LabelRecord] = {}
        for record in self.all_records():
            state[record.key] = record
        return state

    def audit(self, post_id: str, annotator_id: str, round: int) -> list[LabelRecord]:
        key = (post_id, annotator_id, round)
        return [r for r in self.all_records() if r.key == key]

    def live_for_post(self, post_id: str) -> list[LabelRecord]:
        return [r for r in self.live().values() if r.post_id == post_id]

    def labeled_ids(self, round: int, annotator_id: str | None = None) -> set[str]:
        """Post ids labeled in a round, optionally restricted to one annotator."""
        return {
            r.post_id
            for r in self.live().values()
            if r.round == round and (annotator_id is None or r.annotator_id == annotator_id)
        }


class GoldStore:
    """Resolved gold labels, last resolution wins per post."""

    def __init__(self, path: str | Path):
        self._log = _JsonlLog(path)

    @property
    def path(self) -> Path:
        return self._log.path

    def put(self, gold: GoldLabel) -> None:
        self._log.append(gold.to_record())

    def extend(self, golds: Sequence[GoldLabel]) -> None:
        self._log.extend([g.to_record() for g in golds])

    def live(self) -> dict[str, GoldLabel]:
        state: dict[str, GoldLabel] = {}
        for rec in self._log.records():
            gold = GoldLabel.from_record(rec)
            state[gold.post_id] = gold
        return state


def validate_label(record: LabelRecord, codebook: Codebook) -> list[Violation]:
    """Violations for one record; empty list means the record is valid."""
    return codebook.validate_values(record.values())


def record_label(
    store: LabelStore,
    record: LabelRecord,
    codebook: Codebook,
    known_post_ids: Iterable[str] | None = None,
) -> int:
    """Validate and persist a record; resubmission overwrites but keeps the audit trail."""
    violations = validate_label(record, codebook)
    if violations:
        raise LabelValidationError(violations)
    if known_post_ids is not None and record.post_id not in set(known_post_ids):
        raise UnknownPostError(record.post_id)
    return store.append(record)


def next_batch(
    pool: Sequence[Post],
    size: int,
    annotator_id: str,
    round: int,
    store: LabelStore,
    prefilter: Prefilter | None = None,
    seed: int = 0,
    exclude_labeled_by_any: bool = False,
    exclude_ids: Iterable[str] = (),
) -> list[Post]:
    """Up to `size` posts the annotator has not labeled this round, in seeded order.

    With a prefilter, posts scoring below the threshold are excluded before
    selection. An empty pool yields an empty batch.
    """
    if size < 1:
        raise ValueError("batch size must be >= 1")
    done = store.labeled_ids(round, None if exclude_labeled_by_any else annotator_id)
    blocked = done | set(exclude_ids)
    candidates = [p for p in pool if p.id not in blocked]
    if prefilter is not None:
        score_fn, threshold = prefilter
        scores = score_fn(candidates)
        candidates = [p for p, s in zip(candidates, scores) if s >= threshold]
    candidates.sort(key=lambda p: p.id)
    random.Random(seed).shuffle(candidates)
    return candidates[:size]


def cohen_kappa(pairs: Sequence[tuple[str, str]]) -> float:
    """Cohen's kappa for two raters from (value_a, value_b) pairs.

    Perfect observed agreement is pinned to exactly 1.0 so the degenerate
    all-identical contingency table (expected agreement 1) stays defined.
    """
    if not pairs:
        raise ValueError("kappa needs at least one co-labeled item")
    n = len(pairs)
    agree = sum(1 for a, b in pairs if a == b)
    po = agree / n
    if po == 1.0:
        return 1.0
    counts_a: dict[str, int] = {}
    counts_b: dict[str, int] = {}
    for a, b in pairs:
        counts_a[a] = counts_a.get(a, 0) + 1
        counts_b[b] = counts_b.get(b, 0) + 1
    pe = sum(counts_a.get(v, 0) * counts_b.get(v, 0) for v in counts_a) / (n * n)
    return (po - pe) / (1.0 - pe)


@dataclass(frozen=True)
class AgreementResult:
    round: int
    axis: str
    n_posts: int
    n_pairs: int
    percent_agreement: float | None
    kappa: float | None

    @property
    def has_overlap(self) -> bool:
        return self.n_posts > 0

    def to_dict(self) -> dict:
        return {
            "round": self.round,
            "axis": self.axis,
            "n_posts": self.n_posts,
            "n_pairs": self.n_pairs,
            "percent_agreement": self.percent_agreement,
            "kappa": self.kappa,
        }


def agreement(store: LabelStore, round: int, axis: str) -> AgreementResult:
    """Percent agreement and mean pairwise Cohen's kappa for one axis in one round.

    Posts count as co-labeled when at least two annotators hold a live record.
    No overlap yields an explicit empty result, not zero.
    """
    if axis not in LABEL_AXES:
        raise ValueError(f"unknown axis {axis!r}")
    by_post: dict[str, dict[str, str]] = {}
    for record in store.live().values():
        if record.round != round:
            continue
        value = record.values()[axis]
        by_post.setdefault(record.post_id, {})[record.annotator_id] = (
            "__absent__" if value is None else value
        )
    shared = {pid: vals for pid, vals in by_post.items() if len(vals) >= 2}
    if not shared:
        return AgreementResult(round, axis, 0, 0, None, None)
    identical = sum(1 for vals in shared.values() if len(set(vals.values())) == 1)
    percent = identical / len(shared)
    annotators = sorted({a for vals in shared.values() for a in vals})
    kappas = []
    for a, b in combinations(annotators, 2):
        pairs = [
            (vals[a], vals[b]) for vals in shared.values() if a in vals and b in vals
        ]
        if pairs:
            kappas.append(cohen_kappa(pairs))
    kappa = sum(kappas) / len(kappas) if kappas else None
    return AgreementResult(round, axis, len(shared), len(kappas), percent, kappa)


def resolve_gold(
    label_store: LabelStore,
    gold_store: GoldStore,
    post_id: str,
    chosen: Mapping[str, str | None] | None,
    resolver_id: str,
    codebook: Codebook,
) -> GoldLabel:
    """Resolve a post to gold: unanimity auto-resolves, conflicts take the resolver's choice."""
    records = label_store.live_for_post(post_id)
    if not records:
        raise ResolutionError(f"post {post_id} has no label records to resolve")
    value_sets = {tuple(sorted(r.values().items(), key=lambda kv: kv[0])) for r in records}
    unanimous = len(value_sets) == 1
    if unanimous and (chosen is None or dict(value_sets.pop()) == dict(chosen)):
        values = records[0].values()
        provenance = "unanimous"
        resolver: str | None = None
    else:
        if chosen is None:
            raise ResolutionError(f"post {post_id} has conflicting labels; a choice is required")
        values = {axis: chosen.get(axis) for axis in LABEL_AXES}
        provenance = "resolved"
        resolver = resolver_id
    violations = codebook.validate_values(values)
    if violations:
        raise LabelValidationError(violations)
    gold = GoldLabel(
        post_id=post_id,
        topic=values[AXIS_TOPIC],
        measure_support=values[AXIS_MEASURE],
        government_support=values[AXIS_GOVERNMENT],
        relevance=values[AXIS_RELEVANCE],
        provenance=provenance,
        resolver_id=resolver,
    )
    gold_store.put(gold)
    return gold


def unresolved_posts(label_store: LabelStore, gold_store: GoldStore) -> list[str]:
    """Post ids with live label records but no gold entry yet."""
    resolved = set(gold_store.live())
    return sorted({r.post_id for r in label_store.live().values()} - resolved)


def auto_resolve_unanimous(
    label_store: LabelStore, gold_store: GoldStore, codebook: Codebook
) -> int:
    """Bulk-resolve every post whose live records agree; returns how many were resolved.

    Conflicting posts are left for explicit resolution.
    """
    by_post: dict[str, list[LabelRecord]] = {}
    for record in label_store.live().values():
        by_post.setdefault(record.post_id, []).append(record)
    already = set(gold_store.live())
    golds = []
    for post_id in sorted(by_post):
        if post_id in already:
            continue
        records = by_post[post_id]
        value_sets = {tuple(sorted(r.values().items())) for r in records}
        if len(value_sets) != 1:
            continue
        values = records[0].values()
        if codebook.validate_values(values):
            continue
        golds.append(
            GoldLabel(
                post_id=post_id,
                topic=values[AXIS_TOPIC],
                measure_support=values[AXIS_MEASURE],
                government_support=values[AXIS_GOVERNMENT],
                relevance=values[AXIS_RELEVANCE],
                provenance="unanimous",
            )
        )
    gold_store.extend(golds)
    return len(golds)
