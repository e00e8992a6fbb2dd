"""HTTP/JSON service for the annotation UI: batch claiming, label submission,
agreement summaries, gold resolution, and timeline payloads under /v1.

All durable state lives in the same file stores the CLI operates on; the only
service-private state is the in-memory lease table.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from datetime import date, datetime, timedelta, timezone
from typing import Optional

from fastapi import Depends, FastAPI, Header, HTTPException, Query
from pydantic import BaseModel

from .analytics import AnalyticsError, CaseCounts, EventMarker, timeline_payload
from .codebook import Codebook, default_codebook
from .corpus import Post, post_to_record
from .labeling import (
    GoldStore,
    LabelRecord,
    LabelStore,
    LabelValidationError,
    Prefilter,
    ResolutionError,
    UnknownPostError,
    agreement,
    next_batch,
    record_label,
    resolve_gold,
)
from .sieve import ClassifiedPost


@dataclass
class ServiceConfig:
    lease_seconds: int = 900
    single_annotation: bool = True
    review_mode: bool = False
    round: int = 1
    seed: int = 0
    tokens: dict[str, str] = field(default_factory=dict)  # annotator_id -> token


@dataclass
class Lease:
    post_id: str
    annotator_id: str
    expires_at: datetime


@dataclass
class ServiceState:
    pool: list[Post]
    label_store: LabelStore
    gold_store: GoldStore
    codebook: Codebook = field(default_factory=default_codebook)
    config: ServiceConfig = field(default_factory=ServiceConfig)
    prefilter: Optional[Prefilter] = None
    classified: Optional[list[ClassifiedPost]] = None
    cases: Optional[CaseCounts] = None
    markers: list[EventMarker] = field(default_factory=list)
    leases: dict[tuple[str, str], Lease] = field(default_factory=dict)
    lock: threading.Lock = field(default_factory=threading.Lock)

    def purge_expired(self, now: datetime) -> None:
        expired = [key for key, lease in self.leases.items() if lease.expires_at <= now]
        for key in expired:
            del self.leases[key]

    def leased_ids(self, annotator_id: str | None = None, exclude_annotator: str | None = None) -> set[str]:
        ids = set()
        for lease in self.leases.values():
            if annotator_id is not None and lease.annotator_id != annotator_id:
                continue
            if exclude_annotator is not None and lease.annotator_id == exclude_annotator:
                continue
            ids.add(lease.post_id)
        return ids


class ClaimRequest(BaseModel):
    annotator_id: str
    round: int | None = None
    count: int = 1


class LabelSubmission(BaseModel):
    post_id: str
    annotator_id: str
    round: int | None = None
    topic: str | None = None
    measure_support: str
    government_support: str
    relevance: str


class ResolveRequest(BaseModel):
    post_id: str
    resolver_id: str
    values: dict[str, str | None] | None = None


def create_app(state: ServiceState) -> FastAPI:
    app = FastAPI(title="stanceline annotation service", version="1.0")

    def authorize(annotator_id: str, token: str | None) -> None:
        if not state.config.tokens:
            return
        if state.config.tokens.get(annotator_id) != token:
            raise HTTPException(status_code=401, detail="invalid annotator token")

    def auth_header(x_annotator_token: str | None = Header(default=None)) -> str | None:
        return x_annotator_token

    @app.get("/v1/health")
    def health() -> dict:
        return {
            "status": "ok",
            "pool_size": len(state.pool),
            "codebook_version": state.codebook.version,
        }

    @app.get("/v1/codebook")
    def codebook() -> dict:
        return {
            "version": state.codebook.version,
            "axes": [
                {
                    "name": axis.name,
                    "values": list(axis.values),
                    "definitions": dict(axis.definitions),
                }
                for axis in state.codebook.axes
            ],
            "constraints": [
                {
                    "when": {"axis": rule.axis, "value": rule.value},
                    "require": dict(rule.require),
                }
                for rule in state.codebook.constraints
            ],
        }

    @app.post("/v1/claim")
    def claim(req: ClaimRequest, token: str | None = Depends(auth_header)) -> dict:
        authorize(req.annotator_id, token)
        round_no = req.round if req.round is not None else state.config.round
        now = datetime.now(timezone.utc)
        with state.lock:
            state.purge_expired(now)
            exclude = state.leased_ids(annotator_id=req.annotator_id)
            if state.config.single_annotation:
                exclude |= state.leased_ids(exclude_annotator=req.annotator_id)
            batch = next_batch(
                state.pool,
                max(1, req.count),
                req.annotator_id,
                round_no,
                state.label_store,
                prefilter=state.prefilter,
                seed=state.config.seed,
                exclude_labeled_by_any=state.config.single_annotation,
                exclude_ids=exclude,
            )
            expires = now + timedelta(seconds=state.config.lease_seconds)
            for post in batch:
                state.leases[(post.id, req.annotator_id)] = Lease(
                    post.id, req.annotator_id, expires
                )
        return {
            "status": "ok" if batch else "pool-drained",
            "round": round_no,
            "lease_expires_at": expires.isoformat() if batch else None,
            "posts": [post_to_record(p) for p in batch],
        }

    @app.post("/v1/labels")
    def submit(req: LabelSubmission, token: str | None = Depends(auth_header)) -> dict:
        authorize(req.annotator_id, token)
        round_no = req.round if req.round is not None else state.config.round
        now = datetime.now(timezone.utc)
        with state.lock:
            state.purge_expired(now)
            key = (req.post_id, req.annotator_id)
            if key not in state.leases and not state.config.review_mode:
                raise HTTPException(
                    status_code=409,
                    detail={"status": "no-lease", "post_id": req.post_id},
                )
            record = LabelRecord(
                post_id=req.post_id,
                annotator_id=req.annotator_id,
                round=round_no,
                topic=req.topic,
                measure_support=req.measure_support,
                government_support=req.government_support,
                relevance=req.relevance,
                labeled_at=now,
            )
            try:
                stored_id = record_label(
                    state.label_store,
                    record,
                    state.codebook,
                    known_post_ids=[p.id for p in state.pool],
                )
            except LabelValidationError as exc:
                raise HTTPException(
                    status_code=422,
                    detail={"violations": [v.to_dict() for v in exc.violations]},
                ) from exc
            except UnknownPostError as exc:
                raise HTTPException(
                    status_code=404, detail={"status": "unknown-post", "post_id": req.post_id}
                ) from exc
            state.leases.pop(key, None)
        return {"status": "stored", "stored_id": stored_id}

    @app.get("/v1/agreement")
    def agreement_summary(round: int = Query(...), axis: str = Query(...)) -> dict:
        try:
            result = agreement(state.label_store, round, axis)
        except ValueError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        if not result.has_overlap:
            return {"status": "no-overlap", "round": round, "axis": axis}
        return {"status": "ok", **result.to_dict()}

    @app.get("/v1/disagreements")
    def disagreements(round: int = Query(...)) -> dict:
        """Posts whose live records conflict, with every annotator's values."""
        by_post: dict[str, list[LabelRecord]] = {}
        for record in state.label_store.live().values():
            if record.round == round:
                by_post.setdefault(record.post_id, []).append(record)
        conflicts = []
        for post_id in sorted(by_post):
            records = by_post[post_id]
            if len(records) < 2:
                continue
            if len({tuple(sorted(r.values().items())) for r in records}) > 1:
                conflicts.append(
                    {
                        "post_id": post_id,
                        "records": [
                            {"annotator_id": r.annotator_id, **r.values()} for r in records
                        ],
                    }
                )
        return {"round": round, "conflicts": conflicts}

    @app.post("/v1/resolve")
    def resolve(req: ResolveRequest, token: str | None = Depends(auth_header)) -> dict:
        authorize(req.resolver_id, token)
        try:
            gold = resolve_gold(
                state.label_store,
                state.gold_store,
                req.post_id,
                req.values,
                req.resolver_id,
                state.codebook,
            )
        except ResolutionError as exc:
            raise HTTPException(status_code=409, detail=str(exc)) from exc
        except LabelValidationError as exc:
            raise HTTPException(
                status_code=422,
                detail={"violations": [v.to_dict() for v in exc.violations]},
            ) from exc
        return {"status": "resolved", "gold": gold.to_record()}

    @app.get("/v1/timelines")
    def timelines(
        topic: str = Query("curfew"),
        smoothing: int = Query(1),
        window_start: str | None = Query(None),
        window_end: str | None = Query(None),
    ) -> dict:
        if state.classified is None:
            raise HTTPException(
                status_code=503, detail={"status": "not-ready", "reason": "no classified corpus"}
            )
        window = (
            date.fromisoformat(window_start) if window_start else None,
            date.fromisoformat(window_end) if window_end else None,
        )
        try:
            return timeline_payload(
                state.classified,
                topic,
                smoothing=smoothing,
                window=window,
                cases=state.cases,
                markers=state.markers,
                codebook=state.codebook,
            )
        except AnalyticsError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc

    return app
