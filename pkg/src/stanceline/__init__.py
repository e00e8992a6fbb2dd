"""stanceline: opinion timelines from multilingual social-media posts.

Pipeline stages: corpus ingestion -> codebook-driven labeling -> classifier
training and selection -> cascaded relevance/topic/stance inference -> daily
opinion aggregates with case-count overlays.
"""

__version__ = "0.1.0"

from .codebook import Codebook, default_codebook
from .corpus import CorpusStats, CorpusStore, IngestQuery, Post, ingest, normalize_text
from .harness import DatasetSplit, Example, HyperParams, TrainedClassifier
from .metrics import EvalReport, auc, roc_points, threshold_at_zero_fpr

__all__ = [
    "Codebook",
    "CorpusStats",
    "CorpusStore",
    "DatasetSplit",
    "EvalReport",
    "Example",
    "HyperParams",
    "IngestQuery",
    "Post",
    "TrainedClassifier",
    "auc",
    "default_codebook",
    "ingest",
    "normalize_text",
    "roc_points",
    "threshold_at_zero_fpr",
    "__version__",
]
