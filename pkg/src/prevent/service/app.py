"""HTTP boundary: sessions, live event streams and operator commands.

All mutation goes through the session's command queue; the handlers hold no
state of their own. The event stream is server-sent events with per-session
monotone sequence numbers, so a client can resubscribe from its last cursor
without gaps.
"""

from __future__ import annotations

import asyncio
import json
from pathlib import Path
from typing import Optional

from fastapi import FastAPI, HTTPException, Query, Request
from fastapi.responses import StreamingResponse
from fastapi.staticfiles import StaticFiles

from ..orchestrator import (
    InvalidTaskError,
    NoPendingConsentError,
    OrchestratorError,
    SessionManager,
    TaskMessage,
    UnknownSessionError,
    UnknownTaskError,
)
from ..world import HazardEntity, ScenarioLoadError, load_shipped_scenario
from .schemas import (
    AckResponse,
    ConsentRequest,
    InjectRequest,
    SessionCreateRequest,
    SessionInfo,
    TaskRequest,
)


def create_app(manager: Optional[SessionManager] = None,
               console_dir: Optional[Path] = None) -> FastAPI:
    app = FastAPI(title="prevent gateway", version="1.0")
    app.state.manager = manager or SessionManager()
    if console_dir is not None and (console_dir / "index.html").exists():
        app.mount("/console", StaticFiles(directory=console_dir, html=True), name="console")

    def get_session(session_id: str):
        try:
            return app.state.manager.get(session_id)
        except UnknownSessionError as exc:
            raise HTTPException(status_code=404, detail=str(exc)) from None

    @app.post("/sessions", response_model=SessionInfo)
    def create_session(body: SessionCreateRequest):
        try:
            scenario = load_shipped_scenario(body.scenario)
        except ScenarioLoadError as exc:
            raise HTTPException(status_code=404, detail=str(exc)) from None
        try:
            session = app.state.manager.create(
                scenario, mode=body.mode, seed=body.seed, speed=body.speed
            )
        except OrchestratorError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from None
        return _session_info(session)

    @app.get("/sessions", response_model=list[SessionInfo])
    def list_sessions():
        return [_session_info(s) for s in app.state.manager.list()]

    @app.post("/sessions/{session_id}/tasks", response_model=AckResponse)
    def submit_task(session_id: str, body: TaskRequest):
        session = get_session(session_id)
        msg = TaskMessage(
            task_type=body.task_type,
            task_name=body.task_name,
            location=body.location,
            robot_task_id=body.robot_task_id,
            user_id=body.user_id,
        )
        try:
            session.submit_task(msg, wait=False)
        except InvalidTaskError as exc:
            status = 409 if "busy" in str(exc) else 422
            raise HTTPException(status_code=status, detail=str(exc)) from None
        return AckResponse(accepted=True, detail=f"task {msg.robot_task_id} started")

    @app.post("/sessions/{session_id}/consent", response_model=AckResponse)
    def post_consent(session_id: str, body: ConsentRequest):
        session = get_session(session_id)
        try:
            session.deliver_consent(body.robot_task_id, body.command, body.user_id)
        except UnknownTaskError as exc:
            raise HTTPException(status_code=404, detail=str(exc)) from None
        except NoPendingConsentError as exc:
            raise HTTPException(status_code=409, detail=str(exc)) from None
        return AckResponse(accepted=True, detail=body.command)

    @app.post("/sessions/{session_id}/inject", response_model=AckResponse)
    def post_injection(session_id: str, body: InjectRequest):
        session = get_session(session_id)
        hazard = HazardEntity(
            kind=body.kind,
            x=body.x,
            y=body.y,
            label=body.label,
            chemical=body.chemical,
            containment=body.containment,
            emission_scale=body.scale,
            visible=body.visible,
            on_path=body.on_path,
            in_interaction_zone=body.in_interaction_zone,
            unsafe_ground_truth=body.unsafe,
            appears_at=session.world.clock + body.delay,
        )
        session.inject_hazard(hazard)
        return AckResponse(accepted=True, detail=f"{body.kind} queued")

    @app.get("/sessions/{session_id}/record")
    def get_record(session_id: str):
        session = get_session(session_id)
        if session.record is None:
            raise HTTPException(status_code=404, detail="no finished task in this session")
        return session.record.as_dict()

    @app.get("/sessions/{session_id}/snapshot")
    def get_snapshot(session_id: str):
        return get_session(session_id).snapshot()

    @app.get("/sessions/{session_id}/events")
    async def stream_events(session_id: str, request: Request,
                            cursor: int = Query(default=0, ge=0)):
        session = get_session(session_id)

        async def generator():
            seq = cursor
            loop = asyncio.get_running_loop()
            while True:
                if await request.is_disconnected():
                    return
                events = await loop.run_in_executor(None, session.wait_events, seq, 0.5)
                if not events:
                    yield ": keep-alive\n\n"
                    continue
                for event in events:
                    seq = event.seq
                    data = json.dumps(event.as_dict(), sort_keys=True)
                    yield f"id: {event.seq}\nevent: {event.kind}\ndata: {data}\n\n"

        return StreamingResponse(generator(), media_type="text/event-stream")

    return app


def _session_info(session) -> SessionInfo:
    snap = session.snapshot()
    return SessionInfo(
        session_id=session.session_id,
        scenario_id=session.scenario.scenario_id,
        mode=session.mode,
        busy=snap["busy"],
        last_seq=snap["last_seq"],
    )


def serve(bind: str = "127.0.0.1", port: int = 8787,
          console_dir: Optional[Path] = None) -> None:
    import uvicorn

    uvicorn.run(create_app(console_dir=console_dir), host=bind, port=port,
                log_level="warning")
