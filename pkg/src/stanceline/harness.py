"""Training harness: splits, random hyperparameter search, selection, evaluation.

The protocol per task: draw N random hyperparameter assignments, train each,
pick the best validation accuracy (ties keep the lowest run index), and only
then evaluate that single model on the held-out test split.
"""

from __future__ import annotations

import hashlib
import json
import math
import random
import threading
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np

from .backends import BackendError, ClassifierBackend, get_backend
from .metrics import EvalReport, accuracy_score, compute_report, threshold_at_zero_fpr

TASKS = ("relevance", "topic", "measure_support", "government_support")
POSITIVE_RELEVANCE = "relevant"

# Runs per task: 8 for the sieve models, 5 for the support models.
DEFAULT_RUN_COUNTS = {
    "relevance": 8,
    "topic": 8,
    "measure_support": 5,
    "government_support": 5,
}


class PoolTooSmallError(ValueError):
    def __init__(self, required: int, available: int):
        super().__init__(f"need {required} labeled examples, only {available} available")
        self.required = required
        self.available = available


@dataclass(frozen=True)
class Example:
    """One supervised example; the id ties it back to a corpus post."""

    id: str
    text: str
    label: str


@dataclass(frozen=True)
class DatasetSplit:
    train: tuple[Example, ...]
    validation: tuple[Example, ...]
    test: tuple[Example, ...]
    seed: int
    stratified: bool

    @property
    def sizes(self) -> tuple[int, int, int]:
        return (len(self.train), len(self.validation), len(self.test))

    def fingerprint(self) -> str:
        payload = {
            part: [(ex.id, ex.label) for ex in getattr(self, part)]
            for part in ("train", "validation", "test")
        }
        return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()


def _allocate(counts: dict[str, int], quotas: dict[str, float], total: int) -> dict[str, int]:
    """Largest-remainder rounding of per-class quotas to integers summing to total."""
    alloc = {c: min(int(math.floor(quotas[c])), counts[c]) for c in counts}
    assigned = sum(alloc.values())
    order = sorted(counts, key=lambda c: (-(quotas[c] - math.floor(quotas[c])), c))
    while assigned < total:
        progressed = False
        for c in order:
            if alloc[c] < counts[c]:
                alloc[c] += 1
                assigned += 1
                progressed = True
                if assigned == total:
                    break
        if not progressed:
            raise PoolTooSmallError(total, sum(counts.values()))
    return alloc


def split_dataset(
    examples: Sequence[Example],
    sizes: tuple[int, int, int],
    seed: int,
    stratify: bool = False,
) -> DatasetSplit:
    """Deterministic disjoint train/validation/test split with exact sizes.

    With stratify=True each split's class proportions track the pool's within
    one item per class.
    """
    n_train, n_val, n_test = sizes
    required = n_train + n_val + n_test
    if required > len(examples):
        raise PoolTooSmallError(required, len(examples))
    ids = [ex.id for ex in examples]
    if len(set(ids)) != len(ids):
        raise ValueError("examples must have unique ids")
    rng = random.Random(seed)
    if not stratify:
        pool = sorted(examples, key=lambda ex: ex.id)
        rng.shuffle(pool)
        train = tuple(pool[:n_train])
        val = tuple(pool[n_train : n_train + n_val])
        test = tuple(pool[n_train + n_val : required])
        return DatasetSplit(train, val, test, seed, stratified=False)
    by_label: dict[str, list[Example]] = {}
    for ex in sorted(examples, key=lambda e: e.id):
        by_label.setdefault(ex.label, []).append(ex)
    for members in by_label.values():
        rng.shuffle(members)
    counts = {c: len(members) for c, members in by_label.items()}
    remaining = dict(counts)
    total = len(examples)
    parts: list[tuple[Example, ...]] = []
    cursor = {c: 0 for c in by_label}
    for size in (n_train, n_val, n_test):
        quotas = {c: size * counts[c] / total for c in counts}
        alloc = _allocate(remaining, quotas, size)
        chunk: list[Example] = []
        for c in sorted(by_label):
            take = alloc[c]
            chunk.extend(by_label[c][cursor[c] : cursor[c] + take])
            cursor[c] += take
            remaining[c] -= take
        rng.shuffle(chunk)
        parts.append(tuple(chunk))
    return DatasetSplit(parts[0], parts[1], parts[2], seed, stratified=True)


@dataclass(frozen=True)
class HyperParams:
    learning_rate: float
    batch_size: int
    epochs: int
    seed: int
    extras: Mapping[str, object] = field(default_factory=dict)

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.batch_size < 1 or self.epochs < 1:
            raise ValueError("batch_size and epochs must be positive")

    def to_dict(self) -> dict:
        data = {
            "learning_rate": self.learning_rate,
            "batch_size": self.batch_size,
            "epochs": self.epochs,
            "seed": self.seed,
        }
        if self.extras:
            data["extras"] = dict(self.extras)
        return data

    @classmethod
    def from_dict(cls, data: Mapping) -> "HyperParams":
        return cls(
            learning_rate=float(data["learning_rate"]),
            batch_size=int(data["batch_size"]),
            epochs=int(data["epochs"]),
            seed=int(data["seed"]),
            extras=dict(data.get("extras", {})),
        )


@dataclass(frozen=True)
class Choice:
    values: tuple

    def __post_init__(self):
        if not self.values:
            raise ValueError("empty choice set")

    def sample(self, rng: random.Random):
        return self.values[rng.randrange(len(self.values))]


@dataclass(frozen=True)
class FloatRange:
    lo: float
    hi: float
    log: bool = False

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError("empty range")
        if self.log and self.lo <= 0:
            raise ValueError("log range needs positive bounds")

    def sample(self, rng: random.Random) -> float:
        if self.log:
            return math.exp(rng.uniform(math.log(self.lo), math.log(self.hi)))
        return rng.uniform(self.lo, self.hi)


@dataclass(frozen=True)
class IntRange:
    lo: int
    hi: int  # inclusive

    def __post_init__(self):
        if self.lo > self.hi:
            raise ValueError("empty range")

    def sample(self, rng: random.Random) -> int:
        return rng.randint(self.lo, self.hi)


SearchSpace = Mapping[str, Choice | FloatRange | IntRange]

# Conventional encoder fine-tuning ranges; override per backend via config.
DEFAULT_SEARCH_SPACE: dict[str, Choice | FloatRange | IntRange] = {
    "learning_rate": FloatRange(1e-5, 1e-4, log=True),
    "batch_size": Choice((16, 32)),
    "epochs": Choice((2, 3, 4)),
    "seed": IntRange(0, 2**31 - 1),
}


def sample_hyperparams(space: SearchSpace, rng: random.Random) -> HyperParams:
    """Sample each field independently from its range or set, in sorted field order."""
    sampled = {name: space[name].sample(rng) for name in sorted(space)}
    seed = sampled.pop("seed") if "seed" in sampled else rng.randrange(2**31)
    known = {
        "learning_rate": sampled.pop("learning_rate"),
        "batch_size": sampled.pop("batch_size"),
        "epochs": sampled.pop("epochs"),
        "seed": seed,
    }
    return HyperParams(**known, extras=sampled)


def oversample(examples: Sequence[Example], rng: random.Random) -> list[Example]:
    """Duplicate random minority examples until every class matches the majority count."""
    if not examples:
        raise ValueError("cannot oversample an empty training set")
    by_label: dict[str, list[Example]] = {}
    for ex in examples:
        by_label.setdefault(ex.label, []).append(ex)
    majority = max(len(members) for members in by_label.values())
    result = list(examples)
    for label in sorted(by_label):
        members = by_label[label]
        for _ in range(majority - len(members)):
            result.append(members[rng.randrange(len(members))])
    return result


def _utcnow() -> datetime:
    return datetime.now(timezone.utc).replace(microsecond=0)


class RunRegistry:
    """Append-only record of every training run; appends are atomic per line."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._lock = threading.Lock()

    def record(self, entry: dict) -> None:
        with self._lock:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with open(self.path, "a", encoding="utf-8") as fh:
                fh.write(json.dumps(entry, ensure_ascii=False))
                fh.write("\n")

    def entries(self) -> list[dict]:
        if not self.path.exists():
            return []
        with open(self.path, encoding="utf-8") as fh:
            return [json.loads(line) for line in fh if line.strip()]


@dataclass
class TrainRun:
    index: int
    hyperparams: HyperParams
    model: object
    val_accuracy: float
    backend_id: str


@dataclass
class TrainedClassifier:
    """A selected model plus everything needed to reuse it: metrics, threshold, lineage."""

    backend_id: str
    task: str
    model: object
    hyperparams: HyperParams
    report: EvalReport
    decision_threshold: float | None
    codebook_version: str
    dataset_fingerprint: str
    val_accuracy: float

    def __post_init__(self):
        if self.task not in TASKS:
            raise ValueError(f"unknown task {self.task!r}")
        if (self.decision_threshold is not None) != (self.task == "relevance"):
            raise ValueError("decision_threshold is set exactly for the relevance task")

    @property
    def classes(self) -> tuple[str, ...]:
        return self.model.classes

    def fingerprint(self) -> str:
        return self.model.fingerprint()


def train_run(
    backend: ClassifierBackend,
    train: Sequence[Example],
    validation: Sequence[Example],
    hp: HyperParams,
    task: str,
    index: int = 0,
    registry: RunRegistry | None = None,
    clock: Callable[[], datetime] = _utcnow,
) -> TrainRun:
    """Fit one candidate and score it on the validation split."""
    if not train:
        raise ValueError("training split must be nonempty")
    if not validation:
        raise ValueError("validation split must be nonempty")
    started = clock()
    try:
        model = backend.fit(train, hp)
        probs = backend.predict_proba(model, [ex.text for ex in validation])
    except BackendError:
        raise
    except Exception as exc:
        raise BackendError(f"run {index} failed: {exc}", hp) from exc
    preds = [model.classes[i] for i in np.argmax(probs, axis=1)]
    val_accuracy = accuracy_score([ex.label for ex in validation], preds)
    if registry is not None:
        registry.record(
            {
                "task": task,
                "backend": backend.backend_id,
                "run_index": index,
                "hyperparams": hp.to_dict(),
                "seed": hp.seed,
                "val_accuracy": val_accuracy,
                "started_at": started.isoformat(),
                "finished_at": clock().isoformat(),
            }
        )
    return TrainRun(index, hp, model, val_accuracy, backend.backend_id)


def select_best(runs: Sequence[TrainRun]) -> TrainRun:
    """The run with maximum validation accuracy; ties keep the lowest index."""
    if not runs:
        raise ValueError("no runs to select from")
    best = runs[0]
    for run in runs[1:]:
        if run.val_accuracy > best.val_accuracy:
            best = run
    return best


def evaluate(
    backend: ClassifierBackend, model, test: Sequence[Example]
) -> EvalReport:
    """Test-set metrics for a fitted model (argmax accuracy, macro accuracy, OvR AUC)."""
    if not test:
        raise ValueError("test split must be nonempty")
    probs = backend.predict_proba(model, [ex.text for ex in test])
    return compute_report(probs, [ex.label for ex in test], model.classes)


def relevance_threshold(
    backend: ClassifierBackend, model, validation: Sequence[Example]
) -> tuple[float, float]:
    """Zero-FPR threshold for the relevance sieve, chosen on the validation split."""
    if POSITIVE_RELEVANCE not in model.classes:
        raise ValueError(f"relevance model has no {POSITIVE_RELEVANCE!r} class")
    col = model.classes.index(POSITIVE_RELEVANCE)
    probs = backend.predict_proba(model, [ex.text for ex in validation])
    pairs = [
        (float(probs[i, col]), ex.label == POSITIVE_RELEVANCE)
        for i, ex in enumerate(validation)
    ]
    return threshold_at_zero_fpr(pairs)


def random_search(
    backend: ClassifierBackend,
    split: DatasetSplit,
    task: str,
    n_runs: int | None = None,
    space: SearchSpace | None = None,
    seed: int = 0,
    oversample_train: bool = False,
    registry: RunRegistry | None = None,
    clock: Callable[[], datetime] = _utcnow,
    codebook_version: str = "1.0",
) -> TrainedClassifier:
    """Run the full selection protocol for one task and return the chosen model.

    The test split is touched exactly once, after selection.
    """
    if task not in TASKS:
        raise ValueError(f"unknown task {task!r}")
    n_runs = DEFAULT_RUN_COUNTS[task] if n_runs is None else n_runs
    if n_runs < 1:
        raise ValueError("need at least one run")
    space = DEFAULT_SEARCH_SPACE if space is None else space
    rng = random.Random(seed)
    assignments = [sample_hyperparams(space, rng) for _ in range(n_runs)]
    runs = []
    for index, hp in enumerate(assignments):
        train = list(split.train)
        if oversample_train:
            train = oversample(train, random.Random(hp.seed))
        runs.append(
            train_run(
                backend,
                train,
                split.validation,
                hp,
                task,
                index=index,
                registry=registry,
                clock=clock,
            )
        )
    best = select_best(runs)
    report = evaluate(backend, best.model, split.test)
    threshold = None
    if task == "relevance":
        threshold, _ = relevance_threshold(backend, best.model, split.validation)
    return TrainedClassifier(
        backend_id=backend.backend_id,
        task=task,
        model=best.model,
        hyperparams=best.hyperparams,
        report=report,
        decision_threshold=threshold,
        codebook_version=codebook_version,
        dataset_fingerprint=split.fingerprint(),
        val_accuracy=best.val_accuracy,
    )


def save_classifier(clf: TrainedClassifier, out_dir: str | Path) -> Path:
    """Write the model weights plus a model card; returns the card path."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    backend = get_backend(clf.backend_id)
    backend.save_model(clf.model, out_dir / "model")
    card = {
        "task": clf.task,
        "backend": clf.backend_id,
        "classes": list(clf.classes),
        "hyperparams": clf.hyperparams.to_dict(),
        "val_accuracy": clf.val_accuracy,
        "report": clf.report.to_dict(),
        "decision_threshold": clf.decision_threshold,
        "codebook_version": clf.codebook_version,
        "dataset_fingerprint": clf.dataset_fingerprint,
        "model_fingerprint": clf.fingerprint(),
        "model_dir": "model",
    }
    card_path = out_dir / "card.json"
    card_path.write_text(json.dumps(card, indent=2, ensure_ascii=False), encoding="utf-8")
    return card_path


def load_classifier(card_path: str | Path) -> TrainedClassifier:
    card_path = Path(card_path)
    card = json.loads(card_path.read_text(encoding="utf-8"))
    backend = get_backend(card["backend"])
    model = backend.load_model(card_path.parent / card["model_dir"])
    clf = TrainedClassifier(
        backend_id=card["backend"],
        task=card["task"],
        model=model,
        hyperparams=HyperParams.from_dict(card["hyperparams"]),
        report=EvalReport.from_dict(card["report"]),
        decision_threshold=card["decision_threshold"],
        codebook_version=card["codebook_version"],
        dataset_fingerprint=card["dataset_fingerprint"],
        val_accuracy=float(card["val_accuracy"]),
    )
    if clf.fingerprint() != card["model_fingerprint"]:
        raise ValueError(f"model weights do not match the card fingerprint: {card_path}")
    return clf


def card_hash(card_path: str | Path) -> str:
    return hashlib.sha256(Path(card_path).read_bytes()).hexdigest()


def make_examples(posts: Mapping[str, str], labels: Mapping[str, str | None], axis_name: str) -> list[Example]:
    """Join post texts with one gold axis into training examples, skipping absent values."""
    examples = []
    for post_id in sorted(labels):
        label = labels[post_id]
        if label is None or post_id not in posts:
            continue
        examples.append(Example(id=post_id, text=posts[post_id], label=label))
    return examples
