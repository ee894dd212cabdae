"""HTTP front-end: thin JSON endpoints over the session state machine.

Requests for one session are serialized by a per-session lock (single
writer); different sessions proceed independently. With a store attached,
every mutation is persisted immediately and sessions survive restarts.
"""

from __future__ import annotations

import threading
from contextlib import asynccontextmanager

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field
from typing import Literal

from . import __version__
from .artifacts import Artifacts
from .engine import EngineError
from .session import (
    Session,
    SessionConfig,
    SessionError,
    SessionNotFound,
    SessionStore,
    create_session,
    handle_request,
    model_fingerprint,
)


class CreateSessionBody(BaseModel):
    seed: int | None = None
    root: str | None = None
    max_depth: int = Field(default=6, ge=1)


class AdvanceBody(BaseModel):
    request: Literal["platform", "tilt"]
    prompt: str | None = None


class _Registry:
    """In-memory sessions plus their single-writer locks."""

    def __init__(self):
        self._lock = threading.Lock()
        self._sessions: dict[str, tuple[Session, threading.Lock]] = {}

    def add(self, session: Session) -> None:
        with self._lock:
            self._sessions[session.id] = (session, threading.Lock())

    def get(self, session_id: str) -> tuple[Session, threading.Lock]:
        with self._lock:
            if session_id not in self._sessions:
                raise SessionNotFound(f"unknown session {session_id!r}")
            return self._sessions[session_id]

    def all_sessions(self) -> list[Session]:
        with self._lock:
            return [s for s, _ in self._sessions.values()]


def create_app(artifacts: Artifacts, store: SessionStore | None = None) -> FastAPI:
    registry = _Registry()

    @asynccontextmanager
    async def lifespan(_app: FastAPI):
        yield
        if store is not None:
            for session in registry.all_sessions():
                store.save(session)

    app = FastAPI(title="dairector", version=__version__, lifespan=lifespan)

    def get_session(session_id: str) -> tuple[Session, threading.Lock]:
        try:
            return registry.get(session_id)
        except SessionNotFound:
            if store is not None:
                try:
                    session = store.load(
                        session_id, artifacts.graph, artifacts.tropes,
                        artifacts.model,
                    )
                except SessionNotFound:
                    raise HTTPException(404, f"unknown session {session_id!r}")
                registry.add(session)
                return registry.get(session_id)
            raise HTTPException(404, f"unknown session {session_id!r}")

    @app.get("/api/health")
    def health() -> dict:
        return {
            "status": "ok",
            "version": __version__,
            "plot_corpus_hash": artifacts.plot_corpus_hash,
            "trope_corpus_hash": artifacts.trope_corpus_hash,
            "model_fingerprint": model_fingerprint(artifacts.model),
        }

    @app.post("/api/sessions", status_code=201)
    def create(body: CreateSessionBody) -> dict:
        config = SessionConfig(
            max_depth=body.max_depth, seed=body.seed, root=body.root,
        )
        try:
            session = create_session(
                artifacts.graph, artifacts.tropes, artifacts.model,
                artifacts.names, config,
            )
        except EngineError as exc:
            raise HTTPException(422, str(exc))
        registry.add(session)
        if store is not None:
            store.append_event(session.id, {
                "type": "created",
                "seed": body.seed,
                "root": body.root,
                "max_depth": body.max_depth,
            })
            store.save(session)
        return {
            "session_id": session.id,
            "entry": session.transcript[0].to_dict(),
            "seq": 0,
            "ended": session.ended,
        }

    @app.post("/api/sessions/{session_id}/advance")
    def advance(session_id: str, body: AdvanceBody) -> dict:
        session, lock = get_session(session_id)
        with lock:
            try:
                entry = handle_request(session, body.request, body.prompt)
            except SessionError as exc:
                raise HTTPException(409, str(exc))
            except EngineError as exc:
                raise HTTPException(422, str(exc))
            if store is not None:
                store.append_event(session.id, {
                    "type": "request",
                    "request": body.request,
                    "prompt": body.prompt,
                    "seq": entry.seq,
                })
                store.save(session)
            return {
                "entry": entry.to_dict(),
                "ended": session.ended,
                "seq": entry.seq,
            }

    @app.get("/api/sessions/{session_id}")
    def transcript(session_id: str) -> dict:
        session, lock = get_session(session_id)
        with lock:
            return {
                "session_id": session.id,
                "ended": session.ended,
                "root": session.root_id,
                "entries": [e.to_dict() for e in session.transcript],
            }

    return app
