"""Cascaded inference: relevance sieve, topic sieve, support classifiers.

Posts removed by the relevance sieve are kept in the output with their score
so threshold sensitivity can be re-analyzed offline. Runs are batched and
checkpointed per batch; a resumed run reproduces the uninterrupted output.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
import yaml

from .backends import get_backend
from .codebook import AXIS_GOVERNMENT, AXIS_MEASURE, AXIS_TOPIC, Codebook, default_codebook
from .corpus import Post, format_timestamp
from .harness import POSITIVE_RELEVANCE, TrainedClassifier, card_hash, load_classifier

log = logging.getLogger(__name__)

SUPPORT_AXES = (AXIS_MEASURE, AXIS_GOVERNMENT)


class PipelineError(RuntimeError):
    pass


@dataclass
class ClassifiedPost:
    """Per-post cascade output; stage fields are present iff the post reached the stage."""

    post_id: str
    created_at: str  # ISO-8601 Z, carried so aggregates need no other input
    relevance_score: float
    relevant: bool
    topic: str | None = None
    topic_probs: dict[str, float] | None = None
    measure_support: str | None = None
    measure_probs: dict[str, float] | None = None
    government_support: str | None = None
    government_probs: dict[str, float] | None = None
    model_fingerprints: dict[str, str] = field(default_factory=dict)

    def to_record(self) -> dict:
        return {
            "post_id": self.post_id,
            "created_at": self.created_at,
            "relevance_score": self.relevance_score,
            "relevant": self.relevant,
            "topic": self.topic,
            "topic_probs": self.topic_probs,
            "measure_support": self.measure_support,
            "measure_probs": self.measure_probs,
            "government_support": self.government_support,
            "government_probs": self.government_probs,
            "model_fingerprints": self.model_fingerprints,
        }

    @classmethod
    def from_record(cls, rec: Mapping) -> "ClassifiedPost":
        return cls(
            post_id=rec["post_id"],
            created_at=rec["created_at"],
            relevance_score=float(rec["relevance_score"]),
            relevant=bool(rec["relevant"]),
            topic=rec.get("topic"),
            topic_probs=rec.get("topic_probs"),
            measure_support=rec.get("measure_support"),
            measure_probs=rec.get("measure_probs"),
            government_support=rec.get("government_support"),
            government_probs=rec.get("government_probs"),
            model_fingerprints=dict(rec.get("model_fingerprints", {})),
        )


@dataclass
class PipelineConfig:
    relevance: TrainedClassifier
    threshold: float
    topic: TrainedClassifier
    support: dict[str, TrainedClassifier]
    target_topics: frozenset[str] = frozenset({"curfew"})
    support_on_all_relevant: bool = False
    batch_size: int = 256
    checkpoint_path: Path | None = None

    def validate(self, codebook: Codebook | None = None) -> None:
        codebook = codebook or default_codebook()
        if self.relevance.task != "relevance":
            raise PipelineError("relevance slot must hold a relevance-task model")
        if self.topic.task != "topic":
            raise PipelineError("topic slot must hold a topic-task model")
        if self.threshold != self.relevance.decision_threshold:
            raise PipelineError(
                f"configured threshold {self.threshold!r} does not match the relevance "
                f"model card ({self.relevance.decision_threshold!r})"
            )
        for axis, clf in self.support.items():
            if axis not in SUPPORT_AXES:
                raise PipelineError(f"unknown support axis {axis!r}")
            if clf.task != axis:
                raise PipelineError(f"support model for {axis} has task {clf.task}")
        unknown = self.target_topics - set(codebook.values(AXIS_TOPIC))
        if unknown:
            raise PipelineError(f"target topics outside the codebook: {sorted(unknown)}")
        versions = {clf.codebook_version for clf in self.classifiers()}
        if len(versions) > 1:
            raise PipelineError(f"models span codebook versions {sorted(versions)}")
        if self.batch_size < 1:
            raise PipelineError("batch_size must be >= 1")

    def classifiers(self) -> list[TrainedClassifier]:
        return [self.relevance, self.topic, *self.support.values()]

    def fingerprints(self) -> dict[str, str]:
        prints = {"relevance": self.relevance.fingerprint(), "topic": self.topic.fingerprint()}
        for axis, clf in self.support.items():
            prints[axis] = clf.fingerprint()
        return prints


def _scores(clf: TrainedClassifier, texts: Sequence[str], positive: str) -> np.ndarray:
    backend = get_backend(clf.backend_id)
    probs = backend.predict_proba(clf.model, texts)
    if positive not in clf.classes:
        raise PipelineError(f"model has no {positive!r} class")
    return probs[:, clf.classes.index(positive)]


def apply_relevance_sieve(
    posts: Sequence[Post], clf: TrainedClassifier, threshold: float
) -> tuple[list[tuple[Post, float]], list[tuple[Post, float]]]:
    """Partition posts into (kept, removed) by relevance score against the threshold."""
    if not posts:
        return [], []
    scores = _scores(clf, [p.text for p in posts], POSITIVE_RELEVANCE)
    kept, removed = [], []
    for post, score in zip(posts, scores):
        (kept if score >= threshold else removed).append((post, float(score)))
    return kept, removed


def classify_topics(
    posts: Sequence[Post], clf: TrainedClassifier
) -> list[tuple[Post, str, dict[str, float]]]:
    """Attach the argmax topic and full probability vector to each post."""
    if not posts:
        return []
    backend = get_backend(clf.backend_id)
    probs = backend.predict_proba(clf.model, [p.text for p in posts])
    out = []
    for post, row in zip(posts, probs):
        label = clf.classes[int(np.argmax(row))]
        out.append((post, label, {c: float(v) for c, v in zip(clf.classes, row)}))
    return out


def classify_support(
    items: Sequence[tuple[Post, str]],
    clf: TrainedClassifier,
    axis: str,
    allowed_topics: frozenset[str] | None = None,
) -> list[tuple[Post, str, dict[str, float]]]:
    """Attach a support label + probabilities; measure support requires an allowed topic."""
    if axis not in SUPPORT_AXES:
        raise ValueError(f"unknown support axis {axis!r}")
    if axis == AXIS_MEASURE and allowed_topics is not None:
        for post, topic in items:
            if topic not in allowed_topics:
                raise PipelineError(
                    f"post {post.id} has topic {topic!r}, outside the target topics"
                )
    if not items:
        return []
    backend = get_backend(clf.backend_id)
    probs = backend.predict_proba(clf.model, [p.text for p, _ in items])
    out = []
    for (post, _), row in zip(items, probs):
        label = clf.classes[int(np.argmax(row))]
        out.append((post, label, {c: float(v) for c, v in zip(clf.classes, row)}))
    return out


class _Checkpoint:
    """Batch results keyed by batch index, appended as the run progresses.

    The header records the batching geometry; resuming with a different
    batch size or corpus would misalign batches, so it is refused.
    """

    def __init__(self, path: Path | None, batch_size: int, corpus_size: int):
        self.path = path
        self.meta = {"batch_size": batch_size, "corpus_size": corpus_size}
        self.done: dict[int, list[dict]] = {}
        if path is not None and path.exists():
            with open(path, encoding="utf-8") as fh:
                for line in fh:
                    if not line.strip():
                        continue
                    entry = json.loads(line)
                    if "meta" in entry:
                        if entry["meta"] != self.meta:
                            raise PipelineError(
                                f"checkpoint {path} was written with {entry['meta']}, "
                                f"current run uses {self.meta}"
                            )
                        continue
                    self.done[int(entry["batch"])] = entry["results"]
        elif path is not None:
            self._append({"meta": self.meta})

    def _append(self, entry: dict) -> None:
        assert self.path is not None
        self.path.parent.mkdir(parents=True, exist_ok=True)
        with open(self.path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(entry, ensure_ascii=False))
            fh.write("\n")
            fh.flush()

    def put(self, index: int, results: list[dict]) -> None:
        self.done[index] = results
        if self.path is not None:
            self._append({"batch": index, "results": results})


def _classify_batch(
    posts: Sequence[Post], config: PipelineConfig, fingerprints: dict[str, str]
) -> list[ClassifiedPost]:
    kept, removed = apply_relevance_sieve(posts, config.relevance, config.threshold)
    results: dict[str, ClassifiedPost] = {}
    for post, score in removed:
        results[post.id] = ClassifiedPost(
            post_id=post.id,
            created_at=format_timestamp(post.created_at),
            relevance_score=score,
            relevant=False,
            model_fingerprints={"relevance": fingerprints["relevance"]},
        )
    with_topics = classify_topics([p for p, _ in kept], config.topic)
    scores = {post.id: score for post, score in kept}
    for post, label, probs in with_topics:
        results[post.id] = ClassifiedPost(
            post_id=post.id,
            created_at=format_timestamp(post.created_at),
            relevance_score=scores[post.id],
            relevant=True,
            topic=label,
            topic_probs=probs,
            model_fingerprints={
                "relevance": fingerprints["relevance"],
                "topic": fingerprints["topic"],
            },
        )
    if config.support_on_all_relevant:
        support_items = [(post, label) for post, label, _ in with_topics]
    else:
        support_items = [
            (post, label) for post, label, _ in with_topics if label in config.target_topics
        ]
    for axis, clf in config.support.items():
        allowed = None if config.support_on_all_relevant else config.target_topics
        labeled = classify_support(support_items, clf, axis, allowed_topics=allowed)
        for post, label, probs in labeled:
            entry = results[post.id]
            if axis == AXIS_MEASURE:
                entry.measure_support = label
                entry.measure_probs = probs
            else:
                entry.government_support = label
                entry.government_probs = probs
            entry.model_fingerprints[axis] = fingerprints[axis]
    return [results[post.id] for post in posts]


def run_pipeline(posts: Sequence[Post], config: PipelineConfig) -> list[ClassifiedPost]:
    """Classify the whole corpus through the cascade, batch by batch.

    Batches already present in the checkpoint are not recomputed, so an
    interrupted run resumes where it stopped and yields the same output.
    """
    config.validate()
    checkpoint = _Checkpoint(config.checkpoint_path, config.batch_size, len(posts))
    fingerprints = config.fingerprints()
    output: list[ClassifiedPost] = []
    n_batches = (len(posts) + config.batch_size - 1) // config.batch_size
    for index in range(n_batches):
        batch = posts[index * config.batch_size : (index + 1) * config.batch_size]
        if index in checkpoint.done:
            records = checkpoint.done[index]
        else:
            records = [c.to_record() for c in _classify_batch(batch, config, fingerprints)]
            checkpoint.put(index, records)
            log.info("classified batch %d (%d posts)", index, len(batch))
        output.extend(ClassifiedPost.from_record(r) for r in records)
    return output


def write_classified(path: str | Path, records: Sequence[ClassifiedPost]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record.to_record(), ensure_ascii=False))
            fh.write("\n")


def read_classified(path: str | Path) -> list[ClassifiedPost]:
    with open(path, encoding="utf-8") as fh:
        return [ClassifiedPost.from_record(json.loads(line)) for line in fh if line.strip()]


def load_pipeline_config(path: str | Path, checkpoint_path: str | Path | None = None) -> PipelineConfig:
    """Build a pipeline from a config file referencing model cards by path + content hash."""
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        raw = yaml.safe_load(fh)

    def load_card(entry: Mapping) -> TrainedClassifier:
        card_path = path.parent / entry["card"] if not Path(entry["card"]).is_absolute() else Path(entry["card"])
        expected = entry.get("sha256")
        if expected and card_hash(card_path) != expected:
            raise PipelineError(f"model card {card_path} does not match its recorded hash")
        return load_classifier(card_path)

    relevance = load_card(raw["relevance"])
    threshold = raw["relevance"].get("threshold", relevance.decision_threshold)
    if isinstance(threshold, str):
        threshold = float(threshold)
    support = {
        axis: load_card(entry) for axis, entry in (raw.get("support") or {}).items()
    }
    return PipelineConfig(
        relevance=relevance,
        threshold=threshold,
        topic=load_card(raw["topic"]),
        support=support,
        target_topics=frozenset(raw.get("target_topics", ["curfew"])),
        support_on_all_relevant=bool(raw.get("support_on_all_relevant", False)),
        batch_size=int(raw.get("batch_size", 256)),
        checkpoint_path=Path(checkpoint_path) if checkpoint_path else None,
    )


def relevance_scorer(clf: TrainedClassifier):
    """Score function over posts for use as a labeling prefilter."""

    def score(posts: Sequence[Post]) -> list[float]:
        if not posts:
            return []
        return [float(s) for s in _scores(clf, [p.text for p in posts], POSITIVE_RELEVANCE)]

    return score
