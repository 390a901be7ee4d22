"""HTTP service: sessions, message dispatch, and read-only inspection.

The API is a thin, batch-oriented shell over the session engine: turns come
back as complete lists (scripted backends make streaming pointless), every
error is structured ``{code, message}`` JSON, and all numbers the UI shows
(token counts, versions) come from these endpoints rather than being
recomputed client-side.
"""

from __future__ import annotations

import os
import threading
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any

from fastapi import FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse, PlainTextResponse
from pydantic import BaseModel

from . import fixtures
from .backend import build_backend
from .dispatch import MODES, Session, SessionConfig, parse_mode, step_turn
from .errors import (
    BackendFailure,
    CapacityExceeded,
    CtxAgentError,
    RegistryNotFound,
    SessionClosed,
    SessionNotFound,
    UnknownFacet,
)
from .schema import BUDGET_MODES, registry_budget
from .tokenizer import DEFAULT_TOKENIZER
from .toolenv import ToolRegistry, load_registry
from .turns import TrajectoryMeta, write_trajectory

_CROCKFORD = "0123456789ABCDEFGHJKMNPQRSTVWXYZ"


def new_session_id() -> str:
    """ULID: 48-bit millisecond timestamp + 80 random bits, Crockford base32."""
    value = (int(time.time() * 1000) & (1 << 48) - 1) << 80 | int.from_bytes(os.urandom(10), "big")
    chars = []
    for _ in range(26):
        chars.append(_CROCKFORD[value & 31])
        value >>= 5
    return "".join(reversed(chars))


@dataclass
class ServiceConfig:
    backend_spec: str | None = None
    registry_path: str | None = None
    default_registry: str | None = None
    max_sessions: int = 64
    cors_origins: list[str] = field(default_factory=lambda: ["*"])
    trajectory_dir: str | None = None
    ui_dir: str | None = None
    session_config: SessionConfig | None = None
    walkthrough: bool = False

    def __post_init__(self):
        if self.max_sessions < 1:
            raise ValueError("max_sessions must be >= 1")


@dataclass
class SessionRecord:
    id: str
    mode: str
    created_at: str
    registry_id: str
    status: str = "active"

    def to_json(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "mode": self.mode,
            "createdAt": self.created_at,
            "registryId": self.registry_id,
            "status": self.status,
        }


@dataclass
class SessionHandle:
    session: Session
    record: SessionRecord
    lock: threading.Lock = field(default_factory=threading.Lock)


class CreateSessionBody(BaseModel):
    mode: str = "mem"
    registryId: str | None = None


class MessageBody(BaseModel):
    text: str


class SessionStore:
    """Registries, live sessions, and the per-session backend factory."""

    def __init__(self, config: ServiceConfig):
        self.config = config
        self.registries: dict[str, ToolRegistry] = {}
        full, small = fixtures.fixture_registry(), fixtures.it_support_registry()
        self.registries[full.id] = full
        self.registries[small.id] = small
        if config.registry_path:
            registry = load_registry(config.registry_path)
            self.registries[registry.id] = registry
            self.default_registry = config.default_registry or registry.id
        else:
            self.default_registry = config.default_registry or (small.id if config.walkthrough else full.id)
        self.sessions: dict[str, SessionHandle] = {}
        self._lock = threading.Lock()

    def _new_backend(self):
        if self.config.walkthrough and not self.config.backend_spec:
            return fixtures.wifi_ticket_backend()
        if self.config.backend_spec:
            return build_backend(self.config.backend_spec)
        env_url = os.environ.get("CTXAGENT_BACKEND_URL")
        if env_url:
            return build_backend(f"http:{env_url}" if "://" in env_url else env_url)
        raise BackendFailure("no backend configured (set --backend or CTXAGENT_BACKEND_URL)")

    def _session_config(self, registry_id: str) -> SessionConfig:
        if self.config.session_config is not None:
            return self.config.session_config
        # The walkthrough's padded prompts are built for its own small
        # registry; sessions on any other registry get stock prompts.
        if self.config.walkthrough and registry_id == self.default_registry:
            return fixtures.wifi_ticket_config()
        return SessionConfig()

    def create(self, mode_name: str, registry_id: str | None) -> SessionRecord:
        mode = parse_mode(mode_name)
        registry_id = registry_id or self.default_registry
        if registry_id not in self.registries:
            raise RegistryNotFound(f"registry not loaded: {registry_id}")
        with self._lock:
            active = sum(1 for h in self.sessions.values() if h.record.status == "active")
            if active >= self.config.max_sessions:
                raise CapacityExceeded(f"session capacity {self.config.max_sessions} reached")
            session_id = new_session_id()
            session = Session(
                session_id=session_id,
                mode=mode,
                registry=self.registries[registry_id],
                backend=self._new_backend(),
                tokenizer=DEFAULT_TOKENIZER,
                config=self._session_config(registry_id),
            )
            record = SessionRecord(
                id=session_id,
                mode=mode.name,
                created_at=datetime.now(timezone.utc).isoformat(),
                registry_id=registry_id,
            )
            self.sessions[session_id] = SessionHandle(session=session, record=record)
            return record

    def get(self, session_id: str) -> SessionHandle:
        try:
            return self.sessions[session_id]
        except KeyError:
            raise SessionNotFound(f"no such session: {session_id}") from None

    def registry(self, registry_id: str) -> ToolRegistry:
        try:
            return self.registries[registry_id]
        except KeyError:
            raise RegistryNotFound(f"registry not loaded: {registry_id}") from None


def trajectory_meta(handle: SessionHandle) -> TrajectoryMeta:
    session = handle.session
    return TrajectoryMeta(
        session_id=session.id,
        mode=session.mode.name,
        registry_id=handle.record.registry_id,
        executor_base=session.executor_cache.base_prompt(),
        tracker_base=session.tracker_cache.base_prompt(),
        extra={"seed": session.config.seed},
    )


def inspect(handle: SessionHandle, facet: str, registries: dict[str, ToolRegistry]) -> Any:
    session = handle.session
    if facet == "cso":
        return {
            "text": session.state.text,
            "version": session.state.version,
            "lines": [
                {"rawLine": e.raw_line, "key": e.key, "value": e.value, "turnIndex": e.turn_index}
                for e in session.state.entries
            ],
        }
    if facet == "cache":
        return {
            "executor": session.executor_cache.snapshot(),
            "tracker": session.tracker_cache.snapshot(),
        }
    if facet == "trajectory":
        return {
            "meta": trajectory_meta(handle).to_json(),
            "turns": [t.to_json() for t in session.turns],
            "contextSeries": [list(p) for p in session.context_series],
        }
    if facet == "budget":
        registry = registries[handle.record.registry_id]
        return {
            mode: registry_budget(registry.schemas(), mode).to_json() for mode in BUDGET_MODES
        }
    raise UnknownFacet(f"unknown inspection facet: {facet}")


_ERROR_STATUS = {
    "session_not_found": 404,
    "registry_not_found": 404,
    "unknown_facet": 404,
    "unknown_tool": 404,
    "session_closed": 409,
    "capacity_exceeded": 409,
    "already_primed": 409,
    "backend_failure": 502,
    "script_exhausted": 502,
    "channel_mismatch": 502,
}


def create_app(config: ServiceConfig | None = None) -> FastAPI:
    config = config or ServiceConfig()
    store = SessionStore(config)
    app = FastAPI(title="ctxagent", version="0.1.0")
    app.state.store = store

    if config.cors_origins:
        app.add_middleware(
            CORSMiddleware,
            allow_origins=config.cors_origins,
            allow_methods=["*"],
            allow_headers=["*"],
        )

    @app.exception_handler(CtxAgentError)
    async def _domain_error(request: Request, exc: CtxAgentError):
        status = _ERROR_STATUS.get(exc.code, 400)
        return JSONResponse(status_code=status, content={"code": exc.code, "message": str(exc)})

    @app.exception_handler(ValueError)
    async def _value_error(request: Request, exc: ValueError):
        return JSONResponse(status_code=400, content={"code": "bad_request", "message": str(exc)})

    @app.exception_handler(Exception)
    async def _internal_error(request: Request, exc: Exception):
        return JSONResponse(
            status_code=500, content={"code": "internal_error", "message": f"{type(exc).__name__}: {exc}"}
        )

    @app.get("/health")
    def health():
        return {"status": "ok", "sessions": len(store.sessions)}

    @app.get("/modes")
    def modes():
        return {"modes": sorted(MODES)}

    @app.get("/registries")
    def registries():
        return {
            "default": store.default_registry,
            "registries": [
                {"id": rid, "tools": len(reg), "cloudToolId": reg.cloud_tool_id}
                for rid, reg in store.registries.items()
            ],
        }

    @app.post("/sessions")
    def create_session(body: CreateSessionBody):
        record = store.create(body.mode, body.registryId)
        return record.to_json()

    @app.get("/sessions")
    def list_sessions():
        return {"sessions": [h.record.to_json() for h in store.sessions.values()]}

    @app.post("/sessions/{session_id}/message")
    def post_message(session_id: str, body: MessageBody):
        handle = store.get(session_id)
        if handle.record.status != "active":
            raise SessionClosed(f"session {session_id} is closed")
        with handle.lock:
            turns = step_turn(handle.session, body.text)
            _persist(handle)
        return {"turns": [t.to_json() for t in turns]}

    @app.get("/sessions/{session_id}/cso")
    def get_cso(session_id: str, format: str = "text"):
        handle = store.get(session_id)
        if format == "json":
            return inspect(handle, "cso", store.registries)
        return PlainTextResponse(handle.session.state.text)

    @app.get("/sessions/{session_id}/{facet}")
    def get_facet(session_id: str, facet: str):
        handle = store.get(session_id)
        return inspect(handle, facet, store.registries)

    @app.delete("/sessions/{session_id}")
    def close_session(session_id: str):
        handle = store.get(session_id)
        handle.record.status = "closed"
        return handle.record.to_json()

    @app.get("/registries/{registry_id}/budget")
    def get_budget(registry_id: str, mode: str = "full-compact"):
        registry = store.registry(registry_id)
        return registry_budget(registry.schemas(), mode).to_json()

    def _persist(handle: SessionHandle):
        if not config.trajectory_dir:
            return
        directory = Path(config.trajectory_dir)
        directory.mkdir(parents=True, exist_ok=True)
        write_trajectory(
            directory / f"{handle.session.id}.jsonl", trajectory_meta(handle), handle.session.turns
        )
        (directory / f"{handle.session.id}.cso.txt").write_text(
            handle.session.state.text, encoding="utf-8"
        )

    if config.ui_dir and Path(config.ui_dir).is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=config.ui_dir, html=True), name="ui")

    return app
