"""Command-line entry points for every pipeline stage.

Every command takes --config/--seed/--out; relative paths inside a config file
resolve against STANCELINE_DATA_DIR when set, else against the config's own
directory. Exit code 0 means the operation fully succeeded.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from datetime import date
from pathlib import Path

import yaml

from . import analytics
from .backends import get_backend
from .codebook import default_codebook, load_codebook
from .corpus import CorpusStore, ingest, load_query_config, read_source
from .harness import (
    Choice,
    Example,
    FloatRange,
    IntRange,
    RunRegistry,
    evaluate,
    load_classifier,
    make_examples,
    random_search,
    save_classifier,
    split_dataset,
)
from .labeling import GoldStore, LabelStore
from .service import ServiceConfig, ServiceState, create_app
from .sieve import load_pipeline_config, read_classified, relevance_scorer, run_pipeline, write_classified

log = logging.getLogger(__name__)

ENV_PORT = "STANCELINE_PORT"
ENV_DATA_DIR = "STANCELINE_DATA_DIR"
DEFAULT_PORT = 8765


def _load_yaml(path: Path) -> dict:
    with open(path, encoding="utf-8") as fh:
        data = yaml.safe_load(fh)
    if not isinstance(data, dict):
        raise ValueError(f"config {path} must hold a mapping")
    return data


def _resolve(path_value: str | Path, config_path: Path) -> Path:
    path = Path(path_value)
    if path.is_absolute():
        return path
    base = os.environ.get(ENV_DATA_DIR)
    return (Path(base) if base else config_path.parent) / path


def parse_space(raw: dict) -> dict:
    """Search-space entries: {choice: [...]}, {range: [lo,hi]}, {log_range: [lo,hi]}, {int_range: [lo,hi]}."""
    space = {}
    for name, spec in raw.items():
        if isinstance(spec, dict):
            if "choice" in spec:
                space[name] = Choice(tuple(spec["choice"]))
            elif "range" in spec:
                lo, hi = spec["range"]
                space[name] = FloatRange(float(lo), float(hi))
            elif "log_range" in spec:
                lo, hi = spec["log_range"]
                space[name] = FloatRange(float(lo), float(hi), log=True)
            elif "int_range" in spec:
                lo, hi = spec["int_range"]
                space[name] = IntRange(int(lo), int(hi))
            else:
                raise ValueError(f"search space field {name}: unknown spec {spec}")
        else:
            space[name] = Choice((spec,))
    return space


def _emit(payload: dict, out: str | None) -> None:
    text = json.dumps(payload, indent=2, ensure_ascii=False)
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text + "\n", encoding="utf-8")
    else:
        print(text)


def cmd_ingest(args: argparse.Namespace) -> int:
    config_path = Path(args.config)
    cfg = _load_yaml(config_path)
    query = load_query_config(config_path)
    store = CorpusStore(_resolve(cfg["store"], config_path))
    sources = [_resolve(p, config_path) for p in cfg.get("sources", [])]
    if args.source:
        sources = [Path(p) for p in args.source]
    if not sources:
        raise ValueError("no source files given (config `sources` or --source)")
    stats = ingest(read_source(sources), query, store)
    _emit(
        {"total": stats.total, "per_day": stats.per_day, "per_lang": stats.per_lang},
        args.out,
    )
    return 0


def _load_examples(cfg: dict, config_path: Path, axis: str) -> list[Example]:
    store = CorpusStore(_resolve(cfg["corpus"], config_path))
    posts = {p.id: p.text for p in store.read()}
    gold = GoldStore(_resolve(cfg["gold"], config_path)).live()
    labels = {post_id: g.values().get(axis) for post_id, g in gold.items()}
    return make_examples(posts, labels, axis)


def _task_axis(task: str) -> str:
    # The relevance/topic tasks train on those axes; support tasks use their own axis.
    return task


def cmd_train(args: argparse.Namespace) -> int:
    config_path = Path(args.config)
    cfg = _load_yaml(config_path)
    codebook = (
        load_codebook(_resolve(cfg["codebook"], config_path))
        if "codebook" in cfg
        else default_codebook()
    )
    examples = _load_examples(cfg, config_path, _task_axis(args.task))
    if args.task != "relevance":
        # Downstream tasks train on relevant posts only; relevance trains on everything.
        relevant_ids = {
            ex.id for ex in _load_examples(cfg, config_path, "relevance") if ex.label == "relevant"
        }
        examples = [ex for ex in examples if ex.id in relevant_ids]
    split_cfg = cfg["split"]
    split = split_dataset(
        examples,
        (int(split_cfg["train"]), int(split_cfg["validation"]), int(split_cfg["test"])),
        seed=args.seed,
        stratify=bool(cfg.get("stratify", False)),
    )
    backend = get_backend(args.backend)
    registry = (
        RunRegistry(_resolve(cfg["registry"], config_path)) if "registry" in cfg else None
    )
    space = parse_space(cfg["space"]) if "space" in cfg else None
    clf = random_search(
        backend,
        split,
        args.task,
        n_runs=args.runs,
        space=space,
        seed=args.seed,
        oversample_train=bool(cfg.get("oversample", False)),
        registry=registry,
        codebook_version=codebook.version,
    )
    out_dir = Path(args.out) if args.out else Path(f"models/{args.task}")
    card_path = save_classifier(clf, out_dir)
    log.info(
        "task=%s backend=%s val_accuracy=%.4f test_accuracy=%.4f card=%s",
        args.task,
        args.backend,
        clf.val_accuracy,
        clf.report.accuracy,
        card_path,
    )
    print(str(card_path))
    return 0


def cmd_evaluate(args: argparse.Namespace) -> int:
    config_path = Path(args.config)
    cfg = _load_yaml(config_path)
    clf = load_classifier(_resolve(cfg["card"], config_path))
    examples = _load_examples(cfg, config_path, _task_axis(clf.task))
    if not examples:
        raise ValueError("no labeled examples to evaluate on")
    backend = get_backend(clf.backend_id)
    report = evaluate(backend, clf.model, examples)
    _emit(report.to_dict(), args.out)
    return 0


def cmd_sieve(args: argparse.Namespace) -> int:
    config_path = Path(args.config)
    cfg = _load_yaml(config_path)
    config = load_pipeline_config(config_path, checkpoint_path=args.checkpoint)
    posts = CorpusStore(_resolve(cfg["corpus"], config_path)).read()
    classified = run_pipeline(posts, config)
    out = args.out or "classified.jsonl"
    write_classified(out, classified)
    relevant = sum(1 for c in classified if c.relevant)
    log.info("classified %d posts (%d relevant) -> %s", len(classified), relevant, out)
    print(out)
    return 0


def _timeline_inputs(cfg: dict, config_path: Path):
    classified = read_classified(_resolve(cfg["classified"], config_path))
    cases = (
        analytics.load_case_counts(_resolve(cfg["cases"], config_path))
        if "cases" in cfg
        else None
    )
    markers = [
        analytics.EventMarker(day=date.fromisoformat(str(m["day"])), caption=str(m["caption"]))
        for m in cfg.get("markers", [])
    ]
    window_cfg = cfg.get("window") or {}
    window = (
        date.fromisoformat(str(window_cfg["start"])) if "start" in window_cfg else None,
        date.fromisoformat(str(window_cfg["end"])) if "end" in window_cfg else None,
    )
    return classified, cases, markers, window


def _payload_series(payload: dict) -> list[analytics.TimeSeries]:
    def from_dict(data: dict) -> analytics.TimeSeries:
        return analytics.TimeSeries(
            name=data["name"],
            points=tuple((date.fromisoformat(d), float(v)) for d, v in data["points"]),
            unit=data["unit"],
        )

    series = []
    if payload.get("cases"):
        series.append(from_dict(payload["cases"]))
    series.append(from_dict(payload["topic_rate"]))
    series.extend(from_dict(s) for s in payload["stance"].values())
    return series


def _compute_payload(cfg: dict, config_path: Path) -> tuple[dict, list[analytics.EventMarker]]:
    classified, cases, markers, window = _timeline_inputs(cfg, config_path)
    payload = analytics.timeline_payload(
        classified,
        topic=str(cfg.get("topic", "curfew")),
        smoothing=int(cfg.get("smoothing", 1)),
        window=window,
        tz=str(cfg.get("timezone", analytics.DEFAULT_TZ)),
        cases=cases,
        markers=markers,
        drop_no_opinion=bool(cfg.get("drop_no_opinion", False)),
    )
    return payload, markers


def cmd_timeline(args: argparse.Namespace) -> int:
    config_path = Path(args.config)
    cfg = _load_yaml(config_path)
    payload, markers = _compute_payload(cfg, config_path)
    series = _payload_series(payload)
    if payload["smoothing"] > 1:
        raw_cfg = dict(cfg)
        raw_cfg["smoothing"] = 1
        raw_payload, _ = _compute_payload(raw_cfg, config_path)
        for raw in _payload_series(raw_payload):
            series.append(
                analytics.TimeSeries(
                    name=raw.name + ":raw", points=raw.points, unit=raw.unit
                )
            )
    out = args.out or "timeline.csv"
    analytics.write_timeline_data(out, series, markers)
    print(out)
    return 0


def cmd_export(args: argparse.Namespace) -> int:
    config_path = Path(args.config)
    cfg = _load_yaml(config_path)
    payload, markers = _compute_payload(cfg, config_path)
    stance = {
        value: analytics.TimeSeries(
            name=series["name"],
            points=tuple(
                (date.fromisoformat(d), float(v)) for d, v in series["points"]
            ),
            unit=series["unit"],
        )
        for value, series in payload["stance"].items()
    }
    rate = payload["topic_rate"]
    # the payload's cases are already window-clipped, so the panels line up
    cases = None
    if payload.get("cases"):
        cases = analytics.CaseCounts(
            points=tuple(
                (date.fromisoformat(d), int(round(v)))
                for d, v in payload["cases"]["points"]
            )
        )
    panels = analytics.TimelinePanels(
        topic_rate=analytics.TimeSeries(
            name=rate["name"],
            points=tuple((date.fromisoformat(d), float(v)) for d, v in rate["points"]),
            unit=rate["unit"],
        ),
        stance=stance,
        cases=cases,
    )
    out_base = args.out or "timeline"
    export = analytics.export_timeline(panels, markers, args.format, out_base)
    print(str(export.data_path))
    print(str(export.figure_path))
    return 0


def build_service_state(config_path: Path) -> tuple[ServiceState, dict]:
    cfg = _load_yaml(config_path)
    codebook = (
        load_codebook(_resolve(cfg["codebook"], config_path))
        if "codebook" in cfg
        else default_codebook()
    )
    pool = CorpusStore(_resolve(cfg["corpus"], config_path)).read()
    service_cfg = ServiceConfig(
        lease_seconds=int(cfg.get("lease_seconds", 900)),
        single_annotation=bool(cfg.get("single_annotation", True)),
        review_mode=bool(cfg.get("review_mode", False)),
        round=int(cfg.get("round", 1)),
        seed=int(cfg.get("seed", 0)),
        tokens=dict(cfg.get("tokens", {})),
    )
    prefilter = None
    if "prefilter" in cfg:
        clf = load_classifier(_resolve(cfg["prefilter"]["card"], config_path))
        threshold = cfg["prefilter"].get("threshold", clf.decision_threshold)
        prefilter = (relevance_scorer(clf), float(threshold))
    classified = None
    if "classified" in cfg:
        path = _resolve(cfg["classified"], config_path)
        if path.exists():
            classified = read_classified(path)
    cases = (
        analytics.load_case_counts(_resolve(cfg["cases"], config_path))
        if "cases" in cfg
        else None
    )
    markers = [
        analytics.EventMarker(day=date.fromisoformat(str(m["day"])), caption=str(m["caption"]))
        for m in cfg.get("markers", [])
    ]
    state = ServiceState(
        pool=pool,
        label_store=LabelStore(_resolve(cfg["labels"], config_path)),
        gold_store=GoldStore(_resolve(cfg["gold"], config_path)),
        codebook=codebook,
        config=service_cfg,
        prefilter=prefilter,
        classified=classified,
        cases=cases,
        markers=markers,
    )
    return state, cfg


def cmd_label_serve(args: argparse.Namespace) -> int:
    import uvicorn

    config_path = Path(args.config)
    state, cfg = build_service_state(config_path)
    app = create_app(state)
    port = int(os.environ.get(ENV_PORT, cfg.get("port", DEFAULT_PORT)))
    host = str(cfg.get("host", "127.0.0.1"))
    log.info("serving annotation API on %s:%d (pool of %d posts)", host, port, len(state.pool))
    uvicorn.run(app, host=host, port=port, log_level="warning")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stanceline",
        description="Corpus ingestion, labeling service, classifier training, "
        "cascaded inference, and opinion timelines.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser, config_required: bool = True) -> None:
        p.add_argument("--config", required=config_required, help="YAML config file")
        p.add_argument("--seed", type=int, default=0, help="deterministic seed")
        p.add_argument("--out", default=None, help="output path")

    p = sub.add_parser("ingest", help="replay raw post files through the collection filters")
    common(p)
    p.add_argument("--source", nargs="*", default=None, help="raw record files (overrides config)")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("label-serve", help="run the annotation HTTP service")
    common(p)
    p.set_defaults(func=cmd_label_serve)

    p = sub.add_parser("train", help="random-search training for one task")
    common(p)
    p.add_argument(
        "--task",
        required=True,
        choices=("relevance", "topic", "measure_support", "government_support"),
    )
    p.add_argument("--runs", type=int, default=None, help="hyperparameter draws (default per task)")
    p.add_argument("--backend", default="baseline", choices=("baseline", "encoder"))
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="evaluate a saved model card on labeled data")
    common(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("sieve", help="run the classifier cascade over a corpus")
    common(p)
    p.add_argument("--checkpoint", default=None, help="batch checkpoint file")
    p.set_defaults(func=cmd_sieve)

    p = sub.add_parser("timeline", help="aggregate a classified corpus into timeline data")
    common(p)
    p.set_defaults(func=cmd_timeline)

    p = sub.add_parser("export", help="export timeline data plus the three-panel figure")
    common(p)
    p.add_argument("--format", default="png", help="figure format")
    p.set_defaults(func=cmd_export)

    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:  # surface a clean diagnostic, nonzero exit
        log.error("%s", exc)
        return 1


if __name__ == "__main__":
    sys.exit(main())
