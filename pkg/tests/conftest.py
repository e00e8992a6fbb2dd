import pytest

from stanceline.backends import BaselineBackend
from stanceline.codebook import AXIS_MEASURE, AXIS_RELEVANCE, AXIS_TOPIC
from stanceline.corpus import Post, parse_timestamp, post_from_record
from stanceline.harness import Choice, Example, random_search, split_dataset
from stanceline.synth import generate_corpus


def make_post(
    pid: str,
    text: str = "ik vind deze avondklok draconisch corona",
    lang: str = "nl",
    created_at: str = "2020-11-01T12:00:00Z",
    place: str | None = "BE",
) -> Post:
    return Post(
        id=pid,
        text=text,
        lang=lang,
        created_at=parse_timestamp(created_at),
        place_country=place,
        author_ref="a" * 16,
    )


# Strong, fixed hyperparameters so helper models actually converge.
STRONG_SPACE = {
    "learning_rate": Choice((0.5,)),
    "batch_size": Choice((32,)),
    "epochs": Choice((12,)),
    "seed": Choice((1,)),
}


@pytest.fixture(scope="session")
def small_synth():
    return generate_corpus(n=800, days=10, seed=42)


@pytest.fixture(scope="session")
def synth_posts(small_synth):
    return [post_from_record(r) for r in sorted(small_synth.records, key=lambda r: r["id"])]


@pytest.fixture(scope="session")
def trained_trio(small_synth, synth_posts):
    """Relevance, topic, and measure-support classifiers fitted on the synthetic corpus."""
    texts = {p.id: p.text for p in synth_posts}
    gold = small_synth.gold
    backend = BaselineBackend()

    def fit(task, axis, ids, sizes):
        examples = [Example(pid, texts[pid], gold[pid][axis]) for pid in ids]
        split = split_dataset(examples, sizes, seed=9, stratify=True)
        return random_search(backend, split, task, n_runs=1, space=STRONG_SPACE, seed=9)

    all_ids = sorted(gold)
    relevant_ids = [pid for pid in all_ids if gold[pid][AXIS_RELEVANCE] == "relevant"]
    curfew_ids = [pid for pid in all_ids if gold[pid][AXIS_TOPIC] == "curfew"]
    n_rel = len(relevant_ids)
    n_cur = len(curfew_ids)
    return {
        "relevance": fit("relevance", AXIS_RELEVANCE, all_ids, (560, 80, 160)),
        "topic": fit("topic", AXIS_TOPIC, relevant_ids, (n_rel - 120, 60, 60)),
        "measure_support": fit(
            "measure_support", AXIS_MEASURE, curfew_ids, (n_cur - 60, 30, 30)
        ),
    }
