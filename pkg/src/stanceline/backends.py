"""Pluggable classifier backends.

Two implementations of the same contract: a deterministic hashed n-gram
softmax baseline (numpy/scipy, no model downloads) and a fine-tunable
multilingual transformer encoder (torch/transformers, optional extra).
Model handles expose `classes` (ordered label list) and `fingerprint()`.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass
from pathlib import Path
from typing import TYPE_CHECKING, Protocol, Sequence, runtime_checkable

import numpy as np
import scipy.sparse as sp

if TYPE_CHECKING:
    from .harness import Example, HyperParams

TOKEN_RE = re.compile(r"\w+", re.UNICODE)


class BackendError(RuntimeError):
    """A backend failed to fit or predict; carries the hyperparameters for triage."""

    def __init__(self, message: str, hyperparams=None):
        super().__init__(message)
        self.hyperparams = hyperparams


@runtime_checkable
class ClassifierBackend(Protocol):
    backend_id: str

    def fit(self, train: Sequence["Example"], hp: "HyperParams"): ...

    def predict_proba(self, model, texts: Sequence[str]) -> np.ndarray: ...

    def save_model(self, model, out_dir: Path) -> None: ...

    def load_model(self, out_dir: Path): ...


def _softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=1, keepdims=True)


def _stable_hash(key: str, dim: int) -> int:
    digest = hashlib.blake2b(key.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "big") % dim


@dataclass
class BaselineModel:
    classes: tuple[str, ...]
    weights: np.ndarray  # (hash_dim, n_classes)
    bias: np.ndarray  # (n_classes,)
    hash_dim: int

    def fingerprint(self) -> str:
        h = hashlib.sha256()
        h.update(json.dumps(list(self.classes)).encode())
        h.update(str(self.hash_dim).encode())
        h.update(np.ascontiguousarray(self.weights).tobytes())
        h.update(np.ascontiguousarray(self.bias).tobytes())
        return h.hexdigest()


class BaselineBackend:
    """Hashed unigram+bigram features into a softmax linear model.

    Fully deterministic for fixed hyperparameters: the feature hash is seeded
    by a stable digest, weights start at zero, and the only randomness is the
    seeded shuffle of training batches.
    """

    backend_id = "baseline"

    def __init__(self, hash_dim: int = 2**16):
        self.hash_dim = hash_dim

    def _vectorize(self, texts: Sequence[str], dim: int) -> sp.csr_matrix:
        indptr = [0]
        indices: list[int] = []
        data: list[float] = []
        for text in texts:
            tokens = TOKEN_RE.findall(text.casefold())
            counts: dict[int, float] = {}
            for tok in tokens:
                idx = _stable_hash("1:" + tok, dim)
                counts[idx] = counts.get(idx, 0.0) + 1.0
            for a, b in zip(tokens, tokens[1:]):
                idx = _stable_hash("2:" + a + " " + b, dim)
                counts[idx] = counts.get(idx, 0.0) + 1.0
            norm = np.sqrt(sum(v * v for v in counts.values())) or 1.0
            for idx in sorted(counts):
                indices.append(idx)
                data.append(counts[idx] / norm)
            indptr.append(len(indices))
        return sp.csr_matrix(
            (np.array(data), np.array(indices, dtype=np.int64), np.array(indptr, dtype=np.int64)),
            shape=(len(texts), dim),
        )

    def fit(self, train: Sequence["Example"], hp: "HyperParams") -> BaselineModel:
        if not train:
            raise BackendError("empty training set", hp)
        dim = int(hp.extras.get("hash_dim", self.hash_dim))
        classes = tuple(sorted({ex.label for ex in train}))
        class_index = {label: i for i, label in enumerate(classes)}
        x = self._vectorize([ex.text for ex in train], dim)
        y = np.array([class_index[ex.label] for ex in train])
        n, k = len(train), len(classes)
        onehot = np.zeros((n, k))
        onehot[np.arange(n), y] = 1.0
        weights = np.zeros((dim, k))
        bias = np.zeros(k)
        rng = np.random.default_rng(hp.seed)
        batch = max(1, int(hp.batch_size))
        for _ in range(int(hp.epochs)):
            order = rng.permutation(n)
            for start in range(0, n, batch):
                rows = order[start : start + batch]
                xb = x[rows]
                probs = _softmax(xb @ weights + bias)
                err = (probs - onehot[rows]) / len(rows)
                weights -= hp.learning_rate * (xb.T @ err)
                bias -= hp.learning_rate * err.sum(axis=0)
        return BaselineModel(classes=classes, weights=weights, bias=bias, hash_dim=dim)

    def predict_proba(self, model: BaselineModel, texts: Sequence[str]) -> np.ndarray:
        if len(texts) == 0:
            return np.zeros((0, len(model.classes)))
        x = self._vectorize(texts, model.hash_dim)
        probs = _softmax(x @ model.weights + model.bias)
        return probs / probs.sum(axis=1, keepdims=True)

    def save_model(self, model: BaselineModel, out_dir: Path) -> None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        np.savez(out_dir / "weights.npz", weights=model.weights, bias=model.bias)
        meta = {"classes": list(model.classes), "hash_dim": model.hash_dim}
        (out_dir / "model.json").write_text(json.dumps(meta), encoding="utf-8")

    def load_model(self, out_dir: Path) -> BaselineModel:
        out_dir = Path(out_dir)
        meta = json.loads((out_dir / "model.json").read_text(encoding="utf-8"))
        arrays = np.load(out_dir / "weights.npz")
        return BaselineModel(
            classes=tuple(meta["classes"]),
            weights=arrays["weights"],
            bias=arrays["bias"],
            hash_dim=int(meta["hash_dim"]),
        )


SPECIAL_TOKENS = ("[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]")


@dataclass
class EncoderModel:
    model: object
    tokenizer: object
    classes: tuple[str, ...]
    max_length: int

    def fingerprint(self) -> str:
        import io

        import torch

        buf = io.BytesIO()
        torch.save({k: v.cpu() for k, v in self.model.state_dict().items()}, buf)
        h = hashlib.sha256()
        h.update(json.dumps(list(self.classes)).encode())
        h.update(buf.getvalue())
        return h.hexdigest()


class EncoderBackend:
    """Fine-tunes a multilingual transformer encoder for sequence classification.

    With `pretrained=True` the named checkpoint is fetched through
    transformers; with `pretrained=False` a small randomly initialized encoder
    with a corpus-derived vocabulary is built instead, which keeps the backend
    usable without model downloads (weights are random, the training loop and
    contract are identical).
    """

    backend_id = "encoder"

    def __init__(
        self,
        model_name: str = "bert-base-multilingual-cased",
        pretrained: bool = True,
        max_length: int = 64,
        vocab_size: int = 8000,
        hidden_size: int = 128,
        num_layers: int = 2,
        num_heads: int = 4,
    ):
        self.model_name = model_name
        self.pretrained = pretrained
        self.max_length = max_length
        self.vocab_size = vocab_size
        self.hidden_size = hidden_size
        self.num_layers = num_layers
        self.num_heads = num_heads

    def _build_local(self, texts: Sequence[str], num_labels: int):
        import tempfile
        from collections import Counter

        from transformers import BertConfig, BertForSequenceClassification, BertTokenizer

        counts = Counter()
        for text in texts:
            counts.update(TOKEN_RE.findall(text.casefold()))
        vocab = list(SPECIAL_TOKENS) + [
            tok for tok, _ in counts.most_common(self.vocab_size - len(SPECIAL_TOKENS))
        ]
        vocab_dir = Path(tempfile.mkdtemp(prefix="stanceline-vocab-"))
        (vocab_dir / "vocab.txt").write_text("\n".join(vocab) + "\n", encoding="utf-8")
        tokenizer = BertTokenizer(str(vocab_dir / "vocab.txt"), do_lower_case=True)
        config = BertConfig(
            vocab_size=len(vocab),
            hidden_size=self.hidden_size,
            num_hidden_layers=self.num_layers,
            num_attention_heads=self.num_heads,
            intermediate_size=self.hidden_size * 2,
            max_position_embeddings=self.max_length + 2,
            num_labels=num_labels,
        )
        return tokenizer, BertForSequenceClassification(config)

    def fit(self, train: Sequence["Example"], hp: "HyperParams") -> EncoderModel:
        try:
            import torch
            from transformers import AutoModelForSequenceClassification, AutoTokenizer
        except ImportError as exc:  # pragma: no cover - depends on extras
            raise BackendError(f"encoder backend needs torch+transformers: {exc}", hp)
        if not train:
            raise BackendError("empty training set", hp)
        classes = tuple(sorted({ex.label for ex in train}))
        class_index = {label: i for i, label in enumerate(classes)}
        texts = [ex.text for ex in train]
        torch.manual_seed(hp.seed)
        try:
            if self.pretrained:
                tokenizer = AutoTokenizer.from_pretrained(self.model_name)
                model = AutoModelForSequenceClassification.from_pretrained(
                    self.model_name, num_labels=len(classes)
                )
            else:
                tokenizer, model = self._build_local(texts, len(classes))
        except Exception as exc:
            raise BackendError(f"could not construct encoder model: {exc}", hp) from exc
        labels = torch.tensor([class_index[ex.label] for ex in train])
        optimizer = torch.optim.AdamW(model.parameters(), lr=hp.learning_rate)
        generator = torch.Generator().manual_seed(hp.seed)
        model.train()
        batch = max(1, int(hp.batch_size))
        for _ in range(int(hp.epochs)):
            order = torch.randperm(len(train), generator=generator)
            for start in range(0, len(train), batch):
                rows = order[start : start + batch].tolist()
                enc = tokenizer(
                    [texts[i] for i in rows],
                    padding=True,
                    truncation=True,
                    max_length=self.max_length,
                    return_tensors="pt",
                )
                out = model(**enc, labels=labels[rows])
                optimizer.zero_grad()
                out.loss.backward()
                optimizer.step()
        model.eval()
        return EncoderModel(
            model=model, tokenizer=tokenizer, classes=classes, max_length=self.max_length
        )

    def predict_proba(self, model: EncoderModel, texts: Sequence[str]) -> np.ndarray:
        import torch

        if len(texts) == 0:
            return np.zeros((0, len(model.classes)))
        chunks = []
        with torch.no_grad():
            for start in range(0, len(texts), 32):
                enc = model.tokenizer(
                    list(texts[start : start + 32]),
                    padding=True,
                    truncation=True,
                    max_length=model.max_length,
                    return_tensors="pt",
                )
                logits = model.model(**enc).logits
                chunks.append(torch.softmax(logits, dim=1).numpy())
        probs = np.concatenate(chunks, axis=0)
        return probs / probs.sum(axis=1, keepdims=True)

    def save_model(self, model: EncoderModel, out_dir: Path) -> None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        model.model.save_pretrained(out_dir / "encoder")
        model.tokenizer.save_pretrained(out_dir / "encoder")
        meta = {"classes": list(model.classes), "max_length": model.max_length}
        (out_dir / "model.json").write_text(json.dumps(meta), encoding="utf-8")

    def load_model(self, out_dir: Path) -> EncoderModel:
        from transformers import AutoModelForSequenceClassification, AutoTokenizer

        out_dir = Path(out_dir)
        meta = json.loads((out_dir / "model.json").read_text(encoding="utf-8"))
        model = AutoModelForSequenceClassification.from_pretrained(out_dir / "encoder")
        tokenizer = AutoTokenizer.from_pretrained(out_dir / "encoder")
        model.eval()
        return EncoderModel(
            model=model,
            tokenizer=tokenizer,
            classes=tuple(meta["classes"]),
            max_length=int(meta["max_length"]),
        )


def get_backend(backend_id: str, **kwargs) -> ClassifierBackend:
    if backend_id == "baseline":
        return BaselineBackend(**kwargs)
    if backend_id == "encoder":
        return EncoderBackend(**kwargs)
    raise ValueError(f"unknown backend {backend_id!r} (expected 'baseline' or 'encoder')")
