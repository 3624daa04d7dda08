"""Session lifecycle, persistence atomicity, event fan-out, HTTP surface."""

import json
import threading

import pytest
from fastapi.testclient import TestClient

from parley.cli import _fixture_path
from parley.errors import ConfigError, SessionBusyError, SessionNotFoundError
from parley.model import Role, SessionConfig, Turn
from parley.service import SessionManager, TranscriptStore, build_app, default_registry


def manager_with(tmp_path, **kwargs):
    registry = default_registry(mock_script_path=_fixture_path("replies.json"))
    return SessionManager(data_dir=tmp_path, registry=registry, **kwargs)


def echo_config(**overrides):
    return SessionConfig(
        backends={"stt": "mock", "vision": "mock", "llm": "echo", "tts": "mock"}, **overrides
    )


class TestSessionManager:
    def test_create_default_session_idle(self, tmp_path):
        manager = manager_with(tmp_path)
        session_id = manager.create_session(echo_config())
        session = manager.get(session_id)
        assert session.state.value == "idle"
        assert manager.store.exists(session_id)

    def test_unknown_backend_rejected(self, tmp_path):
        manager = manager_with(tmp_path)
        config = SessionConfig(
            backends={"stt": "mock", "vision": "mock", "llm": "gpt9", "tts": "mock"}
        )
        with pytest.raises(ConfigError):
            manager.create_session(config)

    def test_submit_turn_persists_two_records(self, tmp_path):
        manager = manager_with(tmp_path)
        session_id = manager.create_session(echo_config())
        record = manager.submit_turn(session_id, text="hello")
        assert record.user_text == "hello"
        lines = (tmp_path / f"{session_id}.jsonl").read_text().splitlines()
        kinds = [json.loads(line)["record"] for line in lines]
        assert kinds == ["meta", "turn", "turn"]

    def test_unknown_session(self, tmp_path):
        manager = manager_with(tmp_path)
        with pytest.raises(SessionNotFoundError):
            manager.submit_turn("nope", text="hi")

    def test_busy_session_rejected(self, tmp_path):
        manager = manager_with(tmp_path)
        session_id = manager.create_session(echo_config())
        session = manager.get(session_id)
        session.turn_lock.acquire()
        try:
            with pytest.raises(SessionBusyError):
                manager.submit_turn(session_id, text="hi")
        finally:
            session.turn_lock.release()

    def test_aborted_turn_persists_nothing(self, tmp_path):
        manager = manager_with(tmp_path)
        config = echo_config(timeouts_ms={"tts": 1})
        session_id = manager.create_session(config)
        from parley.errors import TurnAbortedError

        with pytest.raises(TurnAbortedError):
            manager.submit_turn(session_id, text="hello")
        lines = (tmp_path / f"{session_id}.jsonl").read_text().splitlines()
        assert [json.loads(l)["record"] for l in lines] == ["meta"]
        assert manager.get(session_id).state.value == "faulted"
        manager.reset(session_id)
        assert manager.get(session_id).state.value == "idle"

    def test_resume_reloads_history(self, tmp_path):
        manager = manager_with(tmp_path)
        session_id = manager.create_session(echo_config())
        manager.submit_turn(session_id, text="remember this")
        before = manager.get(session_id).driver.history

        fresh = manager_with(tmp_path)
        fresh.create_session(echo_config(), session_id=session_id, resume=True)
        after = fresh.get(session_id).driver.history
        assert after == before

    def test_event_order_identical_across_subscribers(self, tmp_path):
        manager = manager_with(tmp_path)
        session_id = manager.create_session(echo_config())
        manager.submit_turn(session_id, text="hello")
        first = manager.events_since(session_id)
        second = manager.events_since(session_id)
        assert first == second
        states = [e["state"] for e in first if e["kind"] == "state"]
        assert states == ["listening", "transcribing", "thinking", "speaking", "idle"]
        seqs = [e["seq"] for e in first]
        assert seqs == sorted(seqs) and len(set(seqs)) == len(seqs)

    def test_concurrent_sessions_record_metrics(self, tmp_path):
        manager = manager_with(tmp_path)
        ids = [manager.create_session(echo_config()) for _ in range(4)]
        threads = [
            threading.Thread(target=manager.submit_turn, args=(sid,), kwargs={"text": "hi"})
            for sid in ids
        ]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert manager.recorder.count() == 4


class TestTranscriptStore:
    def _turn(self, index, role, text):
        return Turn(turn_index=index, role=role, text=text, created_at=index)

    def test_round_trip(self, tmp_path):
        store = TranscriptStore(tmp_path)
        from parley.model import ConversationHistory

        history = ConversationHistory("sys", budget=500)
        store.write_meta("s1", history, created_at=0)
        user = self._turn(0, Role.USER, "q")
        assistant = self._turn(1, Role.ASSISTANT, "a")
        store.write_turn_pair("s1", user, assistant)
        history.append(user)
        history.append(assistant)
        assert store.load("s1") == history

    def test_torn_tail_line_ignored(self, tmp_path):
        store = TranscriptStore(tmp_path)
        from parley.model import ConversationHistory

        history = ConversationHistory("sys", budget=500)
        store.write_meta("s1", history, created_at=0)
        store.write_turn_pair(
            "s1", self._turn(0, Role.USER, "q"), self._turn(1, Role.ASSISTANT, "a")
        )
        path = tmp_path / "s1.jsonl"
        with open(path, "a", encoding="utf-8") as handle:
            handle.write('{"record": "turn", "turn_index": 2, "role": "user"')  # torn
        loaded = store.load("s1")
        assert [t.turn_index for t in loaded.turns] == [0, 1]

    def test_missing_session_loads_none(self, tmp_path):
        assert TranscriptStore(tmp_path).load("ghost") is None


class TestHttpApi:
    @pytest.fixture
    def manager(self, tmp_path):
        return manager_with(tmp_path)

    @pytest.fixture
    def client(self, manager):
        app = build_app(manager, scenario_path=_fixture_path("scenarios.json"))
        return TestClient(app)

    def _create(self, client, **config):
        body = {"config": {"backends": {
            "stt": "mock", "vision": "mock", "llm": "echo", "tts": "mock"}, **config}}
        response = client.post("/sessions", json=body)
        assert response.status_code == 201
        return response.json()["session_id"]

    def test_create_and_fetch(self, client):
        session_id = self._create(client)
        response = client.get(f"/sessions/{session_id}")
        assert response.json()["state"] == "idle"

    def test_unknown_backend_is_400(self, client):
        response = client.post("/sessions", json={"config": {"backends": {
            "stt": "mock", "vision": "mock", "llm": "gpt9", "tts": "mock"}}})
        assert response.status_code == 400

    def test_turn_round_trip(self, client):
        session_id = self._create(client)
        response = client.post(f"/sessions/{session_id}/turns", json={"text": "hello"})
        assert response.status_code == 200
        body = response.json()
        assert body["committed"] is True
        assert body["user_text"] == "hello"
        latencies = body["stage_latencies"]
        parts = sum(latencies[k] for k in
                    ("stt_ms", "vision_ms", "llm_ms", "tts_ms", "residual_ms"))
        assert abs(latencies["total_ms"] - parts) < 1e-6

        transcript = client.get(f"/sessions/{session_id}/transcript").json()
        assert [t["role"] for t in transcript["turns"]] == ["user", "assistant"]

    def test_unknown_session_is_404(self, client):
        assert client.get("/sessions/ghost").status_code == 404
        assert client.get("/sessions/ghost/events").status_code == 404

    def test_events_endpoint_with_cursor(self, client):
        session_id = self._create(client)
        client.post(f"/sessions/{session_id}/turns", json={"text": "hello"})
        body = client.get(f"/sessions/{session_id}/events").json()
        assert body["events"]
        next_seq = body["next"]
        more = client.get(f"/sessions/{session_id}/events", params={"after": next_seq}).json()
        assert more["events"] == []

    def test_sse_stream_replays_records(self, client):
        session_id = self._create(client)
        client.post(f"/sessions/{session_id}/turns", json={"text": "hello"})
        collected = []
        with client.stream(
            "GET", f"/sessions/{session_id}/stream", params={"once": "true"}
        ) as response:
            assert response.headers["content-type"].startswith("text/event-stream")
            for line in response.iter_lines():
                if line.startswith("data: "):
                    collected.append(json.loads(line[len("data: "):]))
        kinds = [record["kind"] for record in collected]
        assert "state" in kinds and "turn_committed" in kinds
        assert [r["seq"] for r in collected] == sorted(r["seq"] for r in collected)

    def test_metrics_endpoints(self, client):
        session_id = self._create(client)
        client.post(f"/sessions/{session_id}/turns", json={"text": "hello"})
        stages = client.get("/metrics").json()["stages"]
        assert stages["total"]["n"] == 1
        csv_text = client.get("/metrics.csv").text
        assert csv_text.startswith("stage,")

    def test_scenarios_endpoint(self, client):
        body = client.get("/scenarios").json()
        assert len(body["scenarios"]) == 54
        first = body["scenarios"][0]
        assert {"id", "phase", "initial_user_text", "feedback_paragraphs"} <= set(first)

    def test_busy_is_409(self, client, manager):
        session_id = self._create(client)
        session = manager.get(session_id)
        session.turn_lock.acquire()
        try:
            response = client.post(f"/sessions/{session_id}/turns", json={"text": "hi"})
            assert response.status_code == 409
        finally:
            session.turn_lock.release()

    def test_missing_text_and_audio_is_400(self, client):
        session_id = self._create(client)
        response = client.post(f"/sessions/{session_id}/turns", json={})
        assert response.status_code == 400

    def test_abort_surfaces_502_and_reset_recovers(self, client):
        session_id = self._create(client, timeouts_ms={"tts": 1})
        response = client.post(f"/sessions/{session_id}/turns", json={"text": "hello"})
        assert response.status_code == 502
        assert client.get(f"/sessions/{session_id}").json()["state"] == "faulted"
        reset = client.post(f"/sessions/{session_id}/reset")
        assert reset.json()["state"] == "idle"
