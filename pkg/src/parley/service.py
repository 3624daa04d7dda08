"""Network-facing host: session lifecycle, persistence, events, HTTP API.

Transcript files are line-delimited JSON under the data directory, one file
per session. A turn's user and assistant records are written in a single
flush, so the store never holds half a turn. The event log per session is
append-only; every subscriber replays the same total order.

Note: no ``from __future__ import annotations`` here. The HTTP route
signatures reference request models defined inside build_app, and FastAPI
cannot resolve those names once annotations become strings.
"""

import asyncio
import json
import os
import threading
import uuid
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Iterator

from .adapters.base import BackendSet
from .adapters.mock import EchoChat, MockChat, MockScript, MockStt, MockTts, MockVision
from .adapters.wire import HttpChatBackend, WireConfig
from .errors import (
    ConfigError,
    EngineError,
    SessionBusyError,
    SessionNotFoundError,
    TurnAbortedError,
)
from .metrics import LatencyRecorder
from .model import ConversationHistory, SessionConfig, Turn, now_ms
from .pipeline import PipelineDriver, StateKind, TurnRecord

META_RECORD = "meta"
TURN_RECORD = "turn"


class TranscriptStore:
    """Append-only JSONL transcripts, one file per session."""

    def __init__(self, data_dir: str | Path):
        self.data_dir = Path(data_dir)
        self.data_dir.mkdir(parents=True, exist_ok=True)

    def _path(self, session_id: str) -> Path:
        return self.data_dir / f"{session_id}.jsonl"

    def exists(self, session_id: str) -> bool:
        return self._path(session_id).exists()

    def _append(self, session_id: str, lines: list[dict]) -> None:
        payload = "".join(json.dumps(line, ensure_ascii=False) + "\n" for line in lines)
        with open(self._path(session_id), "a", encoding="utf-8") as handle:
            handle.write(payload)
            handle.flush()
            os.fsync(handle.fileno())

    def write_meta(self, session_id: str, history: ConversationHistory, created_at: int) -> None:
        self._append(
            session_id,
            [
                {
                    "record": META_RECORD,
                    "session_id": session_id,
                    "system_prompt": history.system_prompt,
                    "budget": history.budget,
                    "created_at": created_at,
                }
            ],
        )

    def write_turn_pair(self, session_id: str, user: Turn, assistant: Turn) -> None:
        """Both records land in one write: a turn persists whole or not at all."""
        self._append(
            session_id,
            [
                {"record": TURN_RECORD, **user.to_dict()},
                {"record": TURN_RECORD, **assistant.to_dict()},
            ],
        )

    def load(self, session_id: str) -> ConversationHistory | None:
        path = self._path(session_id)
        if not path.exists():
            return None
        meta: dict | None = None
        turns: list[Turn] = []
        with open(path, encoding="utf-8") as handle:
            for raw in handle:
                raw = raw.strip()
                if not raw:
                    continue
                try:
                    record = json.loads(raw)
                except json.JSONDecodeError:
                    break  # torn tail write; everything before it is intact
                if record.get("record") == META_RECORD:
                    meta = record
                elif record.get("record") == TURN_RECORD:
                    turns.append(Turn.from_dict(record))
        if meta is None:
            return None
        history = ConversationHistory(
            system_prompt=meta["system_prompt"], budget=int(meta["budget"])
        )
        for turn in turns:
            history.turns.append(turn)
            history._next_index = turn.turn_index + 1
        history._evict()
        return history


@dataclass
class EventLog:
    """Total-ordered event records for one session."""

    records: list[dict] = field(default_factory=list)
    _lock: threading.Lock = field(default_factory=threading.Lock)
    _seq: int = 0

    def append(self, record: dict) -> None:
        with self._lock:
            record = {"seq": self._seq, **record}
            self._seq += 1
            self.records.append(record)

    def since(self, after: int = -1) -> list[dict]:
        with self._lock:
            return [r for r in self.records if r["seq"] > after]


@dataclass
class Session:
    session_id: str
    config: SessionConfig
    driver: PipelineDriver
    events: EventLog
    created_at: int
    turn_lock: threading.Lock = field(default_factory=threading.Lock)

    @property
    def state(self) -> StateKind:
        return self.driver.state.kind


BackendFactory = Callable[[SessionConfig, "SessionManager"], Any]


class BackendRegistry:
    """Maps backend ids per stage to constructor functions."""

    def __init__(self):
        self._factories: dict[str, dict[str, BackendFactory]] = {
            "stt": {}, "vision": {}, "llm": {}, "tts": {},
        }

    def register(self, stage: str, backend_id: str, factory: BackendFactory) -> None:
        self._factories[stage][backend_id] = factory

    def build(self, stage: str, backend_id: str, config: SessionConfig, manager: "SessionManager"):
        try:
            factory = self._factories[stage][backend_id]
        except KeyError:
            known = sorted(self._factories.get(stage, {}))
            raise ConfigError(
                f"unknown {stage} backend {backend_id!r}; known: {known}"
            ) from None
        return factory(config, manager)


def default_registry(
    mock_script_path: str | Path | None = None,
    wire_config: WireConfig | None = None,
) -> BackendRegistry:
    registry = BackendRegistry()
    registry.register("stt", "mock", lambda cfg, mgr: MockStt(default_text=""))
    registry.register("vision", "mock", lambda cfg, mgr: MockVision())
    registry.register("tts", "mock", lambda cfg, mgr: MockTts())
    registry.register("llm", "echo", lambda cfg, mgr: EchoChat())
    if mock_script_path is not None:
        registry.register(
            "llm", "mock", lambda cfg, mgr: MockChat(MockScript.load(mock_script_path))
        )
    if wire_config is not None:
        registry.register("llm", "http", lambda cfg, mgr: HttpChatBackend(wire_config))
    return registry


class SessionManager:
    """Owns all live sessions; one turn in flight per session."""

    def __init__(
        self,
        data_dir: str | Path,
        registry: BackendRegistry | None = None,
        recorder: LatencyRecorder | None = None,
        seed: int = 0,
    ):
        self.store = TranscriptStore(data_dir)
        self.registry = registry or default_registry()
        self.recorder = recorder or LatencyRecorder()
        self.seed = seed
        self._sessions: dict[str, Session] = {}
        self._lock = threading.Lock()

    def create_session(
        self,
        config: SessionConfig | None = None,
        session_id: str | None = None,
        resume: bool = False,
    ) -> str:
        config = config or SessionConfig()
        backends = BackendSet(
            stt=self.registry.build("stt", config.backends["stt"], config, self),
            vision=self.registry.build("vision", config.backends["vision"], config, self),
            llm=self.registry.build("llm", config.backends["llm"], config, self),
            tts=self.registry.build("tts", config.backends["tts"], config, self),
        )
        session_id = session_id or uuid.uuid4().hex
        with self._lock:
            if session_id in self._sessions:
                raise ConfigError(f"session id {session_id!r} already live")

        history: ConversationHistory | None = None
        restored = False
        if resume:
            history = self.store.load(session_id)
            restored = history is not None
        if history is None:
            history = ConversationHistory(config.system_prompt, config.history_budget)

        events = EventLog()
        created_at = now_ms()
        driver = PipelineDriver(
            config=config,
            backends=backends,
            history=history,
            session_id=session_id,
            emit=lambda record: events.append({"at": now_ms(), **record}),
            persist=lambda user, assistant: self.store.write_turn_pair(
                session_id, user, assistant
            ),
            recorder=self.recorder,
            reflex_seed=self.seed,
        )
        session = Session(
            session_id=session_id,
            config=config,
            driver=driver,
            events=events,
            created_at=created_at,
        )
        with self._lock:
            self._sessions[session_id] = session
        if not restored:
            self.store.write_meta(session_id, history, created_at)
        return session_id

    def get(self, session_id: str) -> Session:
        with self._lock:
            session = self._sessions.get(session_id)
        if session is None:
            raise SessionNotFoundError(f"unknown session {session_id!r}")
        return session

    def list_sessions(self) -> list[Session]:
        with self._lock:
            return list(self._sessions.values())

    def submit_turn(
        self, session_id: str, text: str | None = None, audio_ref: str | None = None
    ) -> TurnRecord | None:
        session = self.get(session_id)
        if not session.turn_lock.acquire(blocking=False):
            raise SessionBusyError(f"session {session_id} already has a turn in flight")
        try:
            if session.state is not StateKind.IDLE:
                raise SessionBusyError(f"session {session_id} is {session.state.value}")
            return session.driver.run_turn(text=text, audio_ref=audio_ref)
        finally:
            session.turn_lock.release()

    def reset(self, session_id: str) -> StateKind:
        session = self.get(session_id)
        with session.turn_lock:
            session.driver.reset()
        return session.state

    def events_since(self, session_id: str, after: int = -1) -> list[dict]:
        return self.get(session_id).events.since(after)

    def transcript(self, session_id: str) -> dict:
        return self.get(session_id).driver.history.to_dict()


# ---------------------------------------------------------------------------
# HTTP layer


def build_app(
    manager: SessionManager,
    scenario_path: str | Path | None = None,
    ui_dir: str | Path | None = None,
):
    """Assemble the FastAPI application over a SessionManager."""
    from fastapi import FastAPI, HTTPException
    from fastapi.middleware.cors import CORSMiddleware
    from fastapi.responses import PlainTextResponse, StreamingResponse
    from pydantic import BaseModel

    app = FastAPI(title="parley", version="0.1.0")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )

    class CreateSessionBody(BaseModel):
        config: dict | None = None
        session_id: str | None = None
        resume: bool = False

    class TurnBody(BaseModel):
        text: str | None = None
        audio_ref: str | None = None

    def _http_error(exc: EngineError):
        if isinstance(exc, SessionNotFoundError):
            return HTTPException(404, str(exc))
        if isinstance(exc, SessionBusyError):
            return HTTPException(409, str(exc))
        if isinstance(exc, TurnAbortedError):
            return HTTPException(502, f"turn aborted in stage {exc.stage}")
        if isinstance(exc, ConfigError):
            return HTTPException(400, str(exc))
        return HTTPException(400, str(exc))

    def _session_view(session: Session) -> dict:
        return {
            "session_id": session.session_id,
            "state": session.state.value,
            "turn_count": len(session.driver.history.turns),
            "next_turn_index": session.driver.history.next_index,
            "created_at": session.created_at,
        }

    @app.get("/")
    def info() -> dict:
        return {"service": "parley", "sessions": len(manager.list_sessions())}

    @app.post("/sessions", status_code=201)
    def create_session(body: CreateSessionBody | None = None) -> dict:
        body = body or CreateSessionBody()
        try:
            config = SessionConfig.from_dict(body.config or {})
            session_id = manager.create_session(
                config, session_id=body.session_id, resume=body.resume
            )
        except EngineError as exc:
            raise _http_error(exc) from exc
        return _session_view(manager.get(session_id))

    @app.get("/sessions")
    def list_sessions() -> dict:
        return {"sessions": [_session_view(s) for s in manager.list_sessions()]}

    @app.get("/sessions/{session_id}")
    def get_session(session_id: str) -> dict:
        try:
            return _session_view(manager.get(session_id))
        except EngineError as exc:
            raise _http_error(exc) from exc

    @app.post("/sessions/{session_id}/turns")
    def submit_turn(session_id: str, body: TurnBody) -> dict:
        if not body.text and not body.audio_ref:
            raise HTTPException(400, "provide text or audio_ref")
        try:
            record = manager.submit_turn(
                session_id, text=body.text, audio_ref=body.audio_ref
            )
        except EngineError as exc:
            raise _http_error(exc) from exc
        if record is None:
            return {"committed": False}
        return {
            "committed": True,
            "user_turn_index": record.user_turn_index,
            "assistant_turn_index": record.assistant_turn_index,
            "user_text": record.user_text,
            "assistant_text": record.assistant_text,
            "emotion": record.envelope.emotion.to_dict() if record.envelope.emotion else None,
            "objects": [o.to_dict() for o in record.envelope.objects],
            "stage_latencies": record.stage_latencies.to_dict(),
        }

    @app.post("/sessions/{session_id}/reset")
    def reset(session_id: str) -> dict:
        try:
            state = manager.reset(session_id)
        except EngineError as exc:
            raise _http_error(exc) from exc
        return {"session_id": session_id, "state": state.value}

    @app.get("/sessions/{session_id}/transcript")
    def transcript(session_id: str) -> dict:
        try:
            return manager.transcript(session_id)
        except EngineError as exc:
            raise _http_error(exc) from exc

    @app.get("/sessions/{session_id}/events")
    def events(session_id: str, after: int = -1) -> dict:
        try:
            records = manager.events_since(session_id, after)
        except EngineError as exc:
            raise _http_error(exc) from exc
        next_seq = records[-1]["seq"] if records else after
        return {"events": records, "next": next_seq}

    @app.get("/sessions/{session_id}/stream")
    async def stream(session_id: str, after: int = -1, once: bool = False):
        # once=true replays the backlog and closes; the default keeps the
        # feed open and pushes records as they appear.
        try:
            manager.get(session_id)
        except EngineError as exc:
            raise _http_error(exc) from exc

        async def feed() -> Iterator[str]:
            cursor = after
            while True:
                records = manager.events_since(session_id, cursor)
                for record in records:
                    cursor = record["seq"]
                    yield f"id: {record['seq']}\ndata: {json.dumps(record)}\n\n"
                if once:
                    return
                await asyncio.sleep(0.05)

        return StreamingResponse(feed(), media_type="text/event-stream")

    @app.get("/metrics")
    def metrics() -> dict:
        return {
            "stages": {
                stage.value: summary.to_dict()
                for stage, summary in manager.recorder.summaries().items()
            }
        }

    @app.get("/metrics.csv", response_class=PlainTextResponse)
    def metrics_csv() -> str:
        return manager.recorder.to_csv()

    if scenario_path is not None:
        from .harness import load_scenarios

        @app.get("/scenarios")
        def scenarios() -> dict:
            items = load_scenarios(scenario_path)
            return {
                "scenarios": [
                    {
                        "id": s.id,
                        "phase": s.phase.value,
                        "initial_user_text": s.initial_user_text,
                        "feedback_paragraphs": list(s.feedback_paragraphs),
                    }
                    for s in items
                ]
            }

    if ui_dir is not None and Path(ui_dir).is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/ui", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app
