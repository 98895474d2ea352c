"""HTTP service: the extension-facing rerank protocol plus event and survey ingestion."""
from __future__ import annotations

import logging
import math
import os
import time
from pathlib import Path
from typing import Optional

from fastapi import Depends, FastAPI, Header, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from .domain import EngagementEvent, EventKind, Participant, Party, Platform, Post, SurveyResponse
from .errors import (FeedlabError, MalformedBatch, PromptExpired, QuotasFull, StudyEnded, UnknownParticipant,
                     UnknownPrompt)
from .experiment import StudyConfig
from .store import Store
from .study import StudyServer
from .surveys import render_metadata

log = logging.getLogger(__name__)

LATENCY_BUDGET_MS = 3000.0

STATUS = {
    UnknownParticipant: 404,
    UnknownPrompt: 404,
    StudyEnded: 409,
    QuotasFull: 409,
    MalformedBatch: 400,
    PromptExpired: 410,
}


class LinkPreviewIn(BaseModel):
    title: str = ""
    description: str = ""


class PostIn(BaseModel):
    post_id: str
    author_id: str = ""
    text: str = ""
    is_ad: bool = False
    link_preview: Optional[LinkPreviewIn] = None
    quoted_text: Optional[str] = None
    created_at: int = 0


class RerankRequest(BaseModel):
    participant_id: str
    load_seq: int = Field(ge=0)
    posts: list[PostIn]
    session_id: Optional[str] = None
    fetched_at: Optional[int] = None


class EnrollRequest(BaseModel):
    participant_id: str = Field(pattern=r"^[A-Za-z0-9_.\-]+$")
    party: Party
    platform: Platform
    pre_survey: dict = {}
    local_tz_offset: int = 0
    enrolled_at: Optional[int] = None


class EventIn(BaseModel):
    kind: EventKind
    at: int
    post_id: Optional[str] = None
    visible_ms: Optional[int] = Field(default=None, ge=0)
    event_id: Optional[str] = None


class SurveyResponseIn(BaseModel):
    participant_id: str
    prompt_id: str
    values: list[int] = Field(min_length=1, max_length=2)
    answered_at: Optional[int] = None


class EventEnvelope(BaseModel):
    participant_id: str
    events: list[EventIn] = []
    responses: list[SurveyResponseIn] = []


def _now_ms() -> int:
    return int(time.time() * 1000)


def error_body(exc: Exception) -> dict:
    code = getattr(exc, "code", None) or type(exc).__name__
    return {"error": code, "message": str(exc)}


def create_app(server: StudyServer, token: Optional[str] = None, reports: Optional[Path] = None,
               latency_budget_ms: float = LATENCY_BUDGET_MS) -> FastAPI:
    app = FastAPI(title="feedlab", version="1")
    app.state.server = server

    @app.exception_handler(FeedlabError)
    async def _feedlab_error(request: Request, exc: FeedlabError):
        status = next((s for cls, s in STATUS.items() if isinstance(exc, cls)), 400)
        return JSONResponse(error_body(exc), status_code=status)

    @app.exception_handler(RequestValidationError)
    async def _invalid(request: Request, exc: RequestValidationError):
        return JSONResponse({"error": "invalid_request", "message": str(exc.errors())}, status_code=400)

    @app.exception_handler(ValueError)
    async def _value_error(request: Request, exc: ValueError):
        return JSONResponse({"error": "invalid_request", "message": str(exc)}, status_code=400)

    def auth(authorization: Optional[str] = Header(default=None)):
        if token is not None and authorization != f"Bearer {token}":
            raise _Unauthorized()

    @app.exception_handler(_Unauthorized)
    async def _unauth(request: Request, exc: Exception):
        return JSONResponse({"error": "unauthorized", "message": "missing or wrong bearer token"}, status_code=401)

    @app.post("/v1/enroll", dependencies=[Depends(auth)])
    def enroll(req: EnrollRequest):
        p = Participant(req.participant_id, req.party, req.platform, dict(req.pre_survey), req.local_tz_offset)
        a = server.enroll(p, req.enrolled_at if req.enrolled_at is not None else _now_ms())
        return a.to_dict()

    @app.post("/v1/rerank", dependencies=[Depends(auth)])
    def rerank(req: RerankRequest):
        t0 = time.perf_counter()
        posts = [Post.from_dict(p.model_dump()) for p in req.posts]
        now = req.fetched_at if req.fetched_at is not None else _now_ms()
        outcome = server.rerank(req.participant_id, req.load_seq, posts, now)
        survey = None
        if outcome.prompt is not None:
            survey = {**outcome.prompt.to_dict(), "render_index": outcome.feed.survey_render_index(),
                      "display": render_metadata(outcome.prompt, _outparty(server, req.participant_id))}
        latency = (time.perf_counter() - t0) * 1000.0
        if latency > latency_budget_ms:
            log.warning("rerank for %s took %.0f ms (budget %.0f)", req.participant_id, latency, latency_budget_ms)
        return {
            "participant_id": req.participant_id,
            "load_seq": req.load_seq,
            "session_id": req.session_id,
            "items": [{"post_id": pid, "origin": origin} for pid, origin in outcome.items()],
            "survey": survey,
            "diagnostics": {**outcome.diagnostics.to_dict(), "latency_ms": round(latency, 3),
                            "over_budget": latency > latency_budget_ms},
        }

    @app.post("/v1/events", dependencies=[Depends(auth)])
    def events(env: EventEnvelope):
        evs = [EngagementEvent(env.participant_id, e.kind, e.at, e.post_id, e.visible_ms, e.event_id)
               for e in env.events]
        stored, dup = server.ingest(env.participant_id, evs)
        answered = []
        for r in env.responses:
            if r.participant_id != env.participant_id:
                raise MalformedBatch("response participant does not match envelope")
            answered.append(_answer(server, r).prompt_id)
        return {"stored": stored, "duplicates": dup, "answered": answered,
                "next_seq": len(server.store.events.get(env.participant_id, []))}

    @app.post("/v1/survey-response", dependencies=[Depends(auth)])
    def survey_response(r: SurveyResponseIn):
        prompt = _answer(server, r)
        return {"prompt_id": prompt.prompt_id, "kind": prompt.kind.value, "status": "recorded"}

    @app.get("/v1/assignment/{participant_id}", dependencies=[Depends(auth)])
    def assignment(participant_id: str):
        return server.assignment(participant_id).to_dict()

    @app.get("/v1/report/{run}", dependencies=[Depends(auth)])
    def report(run: str):
        from .analysis import StudyData, analyze
        if run == "live":
            tables = analyze(StudyData.from_store(server.store, server.config), include_daily=False)
            return {"run": run, "tables": {k: t.to_csv() for k, t in tables.items()},
                    "summary": _summary(tables)}
        root = reports / run / "tables" if reports is not None else None
        if root is None or "/" in run or run.startswith(".") or not root.is_dir():
            return JSONResponse({"error": "unknown_run", "message": run}, status_code=404)
        tables = {p.stem: p.read_text(encoding="utf-8") for p in sorted(root.glob("*.csv"))
                  if p.stem != "daily_metrics"}
        return {"run": run, "tables": tables}

    @app.get("/v1/health")
    def health():
        return {"status": "ok", "participants": len(server.participants)}

    return app


class _Unauthorized(Exception):
    pass


def _answer(server: StudyServer, r: SurveyResponseIn):
    now = r.answered_at if r.answered_at is not None else _now_ms()
    response = SurveyResponse(r.prompt_id, tuple(r.values), now)
    return server.answer(r.participant_id, response, now)


def _finite(v):
    return v if not isinstance(v, float) or math.isfinite(v) else None


def _summary(tables) -> dict:
    out = {}
    for row in tables["exposure_change"].records():
        if row["metric"] == "aapa_share":
            out[f"{row['experiment']}_aapa_share_change"] = _finite(row["relative_change"])
    for row in tables["infeed_effects"].records():
        if row["outcome"] == "thermometer":
            out[f"{row['experiment']}_infeed_thermometer"] = _finite(row["estimate"])
    return out


def server_from_env(store_dir: Optional[str] = None, config: StudyConfig = StudyConfig()) -> StudyServer:
    """Open (or create) the persistent store and pick the scoring backend from the environment."""
    root = store_dir or os.environ.get("FEEDLAB_STORE")
    store = Store.open(root) if root else Store()
    backend = None
    if os.environ.get("SCORER_URL"):
        from .scoring.backends import RemoteInferenceClient
        backend = RemoteInferenceClient()
    return StudyServer.restore(store, config, backend)


def _outparty(server: StudyServer, participant_id: str) -> str:
    return f"{server.participants[participant_id].party.outparty.value}s"
