"""Synthetic multilingual post generator with planted keyword-label signals.

Serves as the mock input stream for ingestion and as ground truth for the
end-to-end exercises: every generated post carries a collection term, and its
gold axes are recoverable from planted vocabulary.
"""

from __future__ import annotations

import hashlib
import random
from dataclasses import dataclass
from datetime import datetime, timedelta, timezone
from typing import Iterator, Sequence

from .codebook import AXIS_GOVERNMENT, AXIS_MEASURE, AXIS_RELEVANCE, AXIS_TOPIC
from .corpus import format_timestamp
from .labeling import LabelRecord

LANGS = ("nl", "fr", "en")

TOPIC_WORDS = {
    "nl": {
        "masks": "mondmaskers",
        "curfew": "avondklok",
        "quarantine": "quarantaine",
        "lockdown": "lockdown",
        "schools": "scholen",
        "testing": "testbeleid",
        "closing-horeca": "horecasluiting",
        "vaccine": "vaccinatie",
        "other-measure": "maatregel",
    },
    "fr": {
        "masks": "masques",
        "curfew": "couvrefeu",
        "quarantine": "quarantaine",
        "lockdown": "confinement",
        "schools": "ecoles",
        "testing": "depistage",
        "closing-horeca": "fermeture",
        "vaccine": "vaccination",
        "other-measure": "mesure",
    },
    "en": {
        "masks": "masks",
        "curfew": "curfew",
        "quarantine": "quarantine",
        "lockdown": "lockdown",
        "schools": "schools",
        "testing": "testing",
        "closing-horeca": "horeca",
        "vaccine": "vaccines",
        "other-measure": "measure",
    },
}

MEASURE_WORDS = {
    "nl": {
        "too-strict": "draconisch",
        "ok": "redelijk",
        "too-loose": "veel te slap",
        "not-applicable": "geen mening",
    },
    "fr": {
        "too-strict": "draconienne",
        "ok": "raisonnable",
        "too-loose": "trop laxiste",
        "not-applicable": "sans avis",
    },
    "en": {
        "too-strict": "draconian",
        "ok": "reasonable",
        "too-loose": "far too lax",
        "not-applicable": "no opinion",
    },
}

GOVERNMENT_WORDS = {
    "nl": {"supportive": "goed bezig", "unsupportive": "wanbeleid", "not-applicable": ""},
    "fr": {"supportive": "bon travail", "unsupportive": "fiasco", "not-applicable": ""},
    "en": {"supportive": "well handled", "unsupportive": "mismanaged", "not-applicable": ""},
}

OPINION_OPENERS = {
    "nl": ("ik vind deze", "eerlijk gezegd is die", "wat een"),
    "fr": ("je trouve cette", "franchement cette", "quelle"),
    "en": ("i think this", "honestly this", "what a"),
}

NEWS_PHRASES = {
    "nl": ("nieuwsupdate corona cijfers van vandaag", "persbericht corona overzicht"),
    "fr": ("bulletin corona chiffres du jour", "communique corona apercu"),
    "en": ("news update corona figures today", "press briefing corona overview"),
}

FILLER = {
    "nl": ("vandaag", "weer", "in belgie", "echt", "nu", "straks"),
    "fr": ("aujourdhui", "encore", "en belgique", "vraiment", "maintenant"),
    "en": ("today", "again", "in belgium", "really", "right now"),
}

DEFAULT_TOPIC_WEIGHTS = {
    "curfew": 0.35,
    "vaccine": 0.14,
    "lockdown": 0.13,
    "masks": 0.10,
    "schools": 0.08,
    "testing": 0.06,
    "closing-horeca": 0.06,
    "quarantine": 0.05,
    "other-measure": 0.03,
}

MEASURE_WEIGHTS = {"too-strict": 0.40, "ok": 0.22, "too-loose": 0.10, "not-applicable": 0.28}
GOVERNMENT_WEIGHTS = {"supportive": 0.25, "unsupportive": 0.30, "not-applicable": 0.45}


@dataclass
class SyntheticCorpus:
    records: list[dict]
    gold: dict[str, dict[str, str | None]]

    def stream(self) -> Iterator[dict]:
        yield from self.records


def _weighted(rng: random.Random, weights: dict[str, float]) -> str:
    items = sorted(weights)
    return rng.choices(items, weights=[weights[k] for k in items], k=1)[0]


def _author_ref(seq: int) -> str:
    return hashlib.sha1(f"author-{seq % 997}".encode()).hexdigest()[:16]


def generate_corpus(
    n: int = 5000,
    days: int = 30,
    start: str = "2020-10-13",
    seed: int = 0,
    relevance_rate: float = 0.53,
    langs: Sequence[str] = LANGS,
    country: str = "BE",
    topic_weights: dict[str, float] | None = None,
    noise_records: int = 0,
) -> SyntheticCorpus:
    """Generate `n` matching posts over `days` days, plus optional non-matching noise.

    Exactly round(n * relevance_rate) posts are opinionated (relevant); the
    rest read like news feeds. Noise records (wrong language, out of window,
    missing place) exercise the ingest filters and never carry gold labels.
    """
    rng = random.Random(seed)
    topic_weights = topic_weights or DEFAULT_TOPIC_WEIGHTS
    window_start = datetime.fromisoformat(start).replace(tzinfo=timezone.utc)
    relevant_flags = [True] * round(n * relevance_rate) + [False] * (n - round(n * relevance_rate))
    rng.shuffle(relevant_flags)
    records: list[dict] = []
    gold: dict[str, dict[str, str | None]] = {}
    for seq, relevant in enumerate(relevant_flags):
        lang = langs[rng.randrange(len(langs))]
        created = window_start + timedelta(
            days=rng.randrange(days), seconds=rng.randrange(86400)
        )
        post_id = f"t{seq:07d}"
        if relevant:
            topic = _weighted(rng, topic_weights)
            measure = _weighted(rng, MEASURE_WEIGHTS)
            government = _weighted(rng, GOVERNMENT_WEIGHTS)
            pieces = [
                OPINION_OPENERS[lang][rng.randrange(len(OPINION_OPENERS[lang]))],
                TOPIC_WORDS[lang][topic],
                MEASURE_WORDS[lang][measure],
                GOVERNMENT_WORDS[lang][government],
                FILLER[lang][rng.randrange(len(FILLER[lang]))],
                "corona",
            ]
            gold[post_id] = {
                AXIS_TOPIC: topic,
                AXIS_MEASURE: measure,
                AXIS_GOVERNMENT: government,
                AXIS_RELEVANCE: "relevant",
            }
        else:
            pieces = [
                NEWS_PHRASES[lang][rng.randrange(len(NEWS_PHRASES[lang]))],
                FILLER[lang][rng.randrange(len(FILLER[lang]))],
            ]
            if rng.random() < 0.5:
                pieces.append("https://news.example/" + post_id)
            gold[post_id] = {
                AXIS_TOPIC: None,
                AXIS_MEASURE: "not-applicable",
                AXIS_GOVERNMENT: "not-applicable",
                AXIS_RELEVANCE: "irrelevant",
            }
        if rng.random() < 0.15:
            pieces.insert(0, f"@user{rng.randrange(50)}")
        text = " ".join(piece for piece in pieces if piece)
        records.append(
            {
                "id": post_id,
                "text": text,
                "lang": lang,
                "created_at": format_timestamp(created),
                "place_country": country,
                "author_ref": _author_ref(seq),
            }
        )
    for extra in range(noise_records):
        kind = extra % 3
        created = window_start + timedelta(days=rng.randrange(days), seconds=rng.randrange(86400))
        record = {
            "id": f"noise{extra:05d}",
            "text": "corona update " + FILLER["en"][rng.randrange(len(FILLER["en"]))],
            "lang": "en",
            "created_at": format_timestamp(created),
            "place_country": country,
            "author_ref": _author_ref(n + extra),
        }
        if kind == 0:
            record["lang"] = "de"
        elif kind == 1:
            record["created_at"] = format_timestamp(created + timedelta(days=days + 30))
        else:
            record["place_country"] = None
        records.append(record)
    rng.shuffle(records)
    return SyntheticCorpus(records=records, gold=gold)


def default_query_terms() -> dict[str, list[str]]:
    """Illustrative multilingual collection terms matching the generator vocabulary."""
    terms = {lang: ["corona", "covid"] for lang in LANGS}
    for lang in LANGS:
        terms[lang].extend(sorted(set(TOPIC_WORDS[lang].values())))
    return terms


def simulate_labels(
    corpus: SyntheticCorpus,
    annotator_ids: Sequence[str] = ("ann-1",),
    round: int = 1,
    noise: float = 0.0,
    seed: int = 0,
    post_ids: Sequence[str] | None = None,
) -> list[LabelRecord]:
    """Annotator judgments derived from gold, with optional relevance-axis noise."""
    rng = random.Random(seed)
    ids = list(post_ids) if post_ids is not None else sorted(corpus.gold)
    records = []
    for annotator in annotator_ids:
        for post_id in ids:
            values = dict(corpus.gold[post_id])
            if noise > 0 and rng.random() < noise:
                if values[AXIS_RELEVANCE] == "relevant":
                    values = {
                        AXIS_TOPIC: None,
                        AXIS_MEASURE: "not-applicable",
                        AXIS_GOVERNMENT: "not-applicable",
                        AXIS_RELEVANCE: "irrelevant",
                    }
                else:
                    values = {
                        AXIS_TOPIC: "other-measure",
                        AXIS_MEASURE: "not-applicable",
                        AXIS_GOVERNMENT: "not-applicable",
                        AXIS_RELEVANCE: "relevant",
                    }
            records.append(
                LabelRecord(
                    post_id=post_id,
                    annotator_id=annotator,
                    round=round,
                    topic=values[AXIS_TOPIC],
                    measure_support=values[AXIS_MEASURE],
                    government_support=values[AXIS_GOVERNMENT],
                    relevance=values[AXIS_RELEVANCE],
                    labeled_at=datetime(2021, 5, 1, tzinfo=timezone.utc)
                    + timedelta(seconds=len(records)),
                )
            )
    return records
