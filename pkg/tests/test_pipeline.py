"""State machine transitions, liveness, and full turn runs."""

import pytest

from conftest import make_driver, make_script
from parley.adapters.base import ResponseEnvelope
from parley.adapters.mock import MockChat, ScriptEntry
from parley.animation import CueKind
from parley.errors import ContractError, TurnAbortedError
from parley.model import CameraRole, SessionConfig, Stage, VisualObservation
from parley.pipeline import (
    IDLE,
    AudioReady,
    CaptureFrames,
    CommitTurn,
    EmitAnimationCue,
    IgnoredEvent,
    LlmResponseReady,
    PipelineState,
    RecordLatency,
    Reset,
    SpeechPlaybackComplete,
    StageTimeout,
    StartTranscription,
    StateKind,
    SubmitPrompt,
    SynthesizeSpeech,
    TranscriptReady,
    UserSpeechEnd,
    UserSpeechStart,
    VisualCaptured,
    faulted,
    step,
)


def observation(latency=2130.0):
    return VisualObservation(CameraRole.TASK_VIEW, "fixture:x", 0, latency)


def envelope(text="hi", latency=9720.0):
    return ResponseEnvelope(reply_text=text, latency_ms=latency)


def drive(events, barge_in=False, start=IDLE):
    state = start
    collected = []
    for event in events:
        state, actions = step(state, event, barge_in)
        collected.extend(actions)
    return state, collected


FULL_CYCLE = (
    UserSpeechStart(),
    UserSpeechEnd("utt-1"),
    TranscriptReady("hello", 1300.0),
    VisualCaptured((observation(),)),
    LlmResponseReady(envelope(), 9720.0),
    AudioReady("audio-1", 800.0, 930.0),
    SpeechPlaybackComplete(),
)


class TestStep:
    def test_idle_speech_start(self):
        state, actions = step(IDLE, UserSpeechStart())
        assert state.kind is StateKind.LISTENING
        assert actions == (CaptureFrames(), StartTranscription(None))

    def test_transcript_ready_emits_thinking_cue(self):
        state = PipelineState(StateKind.TRANSCRIBING, visual_done=True)
        state, actions = step(state, TranscriptReady("hello", 1288.0))
        assert state.kind is StateKind.THINKING
        assert actions == (
            EmitAnimationCue(CueKind.THINKING),
            SubmitPrompt(),
            RecordLatency(Stage.STT, 1288.0),
        )

    def test_transcript_before_visual_defers_submit(self):
        state = PipelineState(StateKind.TRANSCRIBING, visual_done=False)
        state, actions = step(state, TranscriptReady("hello", 10.0))
        assert state.kind is StateKind.THINKING
        assert SubmitPrompt() not in actions
        state, actions = step(state, VisualCaptured((observation(50.0),)))
        assert actions == (SubmitPrompt(), RecordLatency(Stage.VISION, 50.0))

    def test_barge_in_off_ignores_speech_while_speaking(self):
        speaking = PipelineState(StateKind.SPEAKING)
        state, actions = step(speaking, UserSpeechStart(), barge_in_enabled=False)
        assert state == speaking
        assert actions == (IgnoredEvent(),)

    def test_barge_in_on_returns_to_listening(self):
        state, actions = step(
            PipelineState(StateKind.SPEAKING), UserSpeechStart(), barge_in_enabled=True
        )
        assert state.kind is StateKind.LISTENING
        assert actions == (CaptureFrames(), StartTranscription(None))

    def test_timeout_faults_from_thinking(self):
        state, actions = step(
            PipelineState(StateKind.THINKING, prompt_submitted=True),
            StageTimeout("llm"),
        )
        assert state == faulted("llm", "timeout")
        assert actions == (EmitAnimationCue(CueKind.IDLE),)

    def test_faulted_needs_reset(self):
        state = faulted("llm", "timeout")
        stuck, actions = step(state, UserSpeechStart())
        assert stuck == state and actions == (IgnoredEvent(),)
        recovered, actions = step(state, Reset())
        assert recovered == IDLE and actions == ()

    def test_empty_transcript_dissolves_turn(self):
        state = PipelineState(StateKind.TRANSCRIBING, visual_done=True)
        state, actions = step(state, TranscriptReady("   ", 5.0))
        assert state == IDLE
        assert actions == (IgnoredEvent(),)

    def test_purity(self):
        state = PipelineState(StateKind.TRANSCRIBING, visual_done=True)
        event = TranscriptReady("same", 1.0)
        assert step(state, event) == step(state, event)

    def test_liveness_full_cycle(self):
        state, actions = drive(FULL_CYCLE)
        assert state == IDLE
        assert actions.count(CommitTurn()) == 1

    def test_audio_before_llm_is_ignored(self):
        state = PipelineState(StateKind.THINKING, visual_done=True, prompt_submitted=True)
        same, actions = step(state, AudioReady("a", 1.0, 1.0))
        assert same == state
        assert actions == (IgnoredEvent(),)

    def test_emotion_overlay_cue_emitted_with_reply(self):
        from parley.model import EmotionLabel, EmotionTag

        state = PipelineState(StateKind.THINKING, visual_done=True, prompt_submitted=True)
        tagged = ResponseEnvelope(
            reply_text="breathe", emotion=EmotionTag(EmotionLabel.OVERWHELMED), latency_ms=1.0
        )
        _, actions = step(state, LlmResponseReady(tagged, 1.0))
        assert actions[0] == EmitAnimationCue(CueKind.EMOTION_OVERLAY, tagged.emotion)
        assert SynthesizeSpeech("breathe") in actions


class TestRunTurn:
    def test_scripted_hello_turn(self):
        driver = make_driver("hi", transcripts={"utt-1": "hello"})
        record = driver.run_turn(audio_ref="utt-1")
        assert record.user_text == "hello"
        assert record.assistant_text == "hi"
        latencies = record.stage_latencies
        assert latencies.stt_ms == 1300.0
        assert latencies.vision_ms == 2130.0
        assert latencies.llm_ms > 0
        assert latencies.tts_ms == 930.0
        assert latencies.residual_ms == 400.0  # one word of playback
        assert latencies.total_ms == sum(
            (latencies.stt_ms, latencies.vision_ms, latencies.llm_ms,
             latencies.tts_ms, latencies.residual_ms)
        )
        assert driver.state == IDLE
        assert [t.text for t in driver.history.turns] == ["hello", "hi"]

    def test_text_mode_records_zero_stt(self):
        driver = make_driver("hi there")
        record = driver.run_turn(text="hello")
        assert record.stage_latencies.stt_ms == 0.0
        assert record.stage_latencies.vision_ms == 2130.0

    def test_llm_timeout_aborts_and_faults(self):
        entry = ScriptEntry(reply_text="slow", latency_ms={"llm": 70_000})
        driver = make_driver(entry)
        with pytest.raises(TurnAbortedError) as info:
            driver.run_turn(text="hello")
        assert info.value.stage == "llm"
        assert driver.state.kind is StateKind.FAULTED
        assert driver.history.turns == []  # nothing committed
        with pytest.raises(ContractError):
            driver.run_turn(text="again")
        driver.reset()
        assert driver.state == IDLE

    def test_empty_transcript_returns_none(self):
        driver = make_driver("unused", transcripts={"silence": ""})
        assert driver.run_turn(audio_ref="silence") is None
        assert driver.state == IDLE
        assert driver.history.turns == []

    def test_event_stream_order(self):
        events = []
        driver = make_driver("hi", emit=events.append)
        driver.run_turn(text="hello")
        states = [e["state"] for e in events if e["kind"] == "state"]
        assert states == ["listening", "transcribing", "thinking", "speaking", "idle"]
        cue_kinds = [e["cue"] for e in events if e["kind"] == "cue"]
        assert cue_kinds == ["thinking", "speaking", "idle"]
        committed = [e for e in events if e["kind"] == "turn_committed"]
        assert len(committed) == 1
        assert any(e["kind"] == "viseme_track" for e in events)
        assert any(e["kind"] == "reflex_track" for e in events)
        latency_stages = [e["stage"] for e in events if e["kind"] == "latency"]
        assert latency_stages == ["stt", "vision", "llm", "tts"]

    def test_thinking_cue_between_transcript_and_reply(self):
        events = []
        driver = make_driver("hi", emit=events.append)
        driver.run_turn(text="hello")
        markers = []
        for event in events:
            if event["kind"] == "latency" and event["stage"] == "stt":
                markers.append("stt_done")
            elif event["kind"] == "cue" and event["cue"] == "thinking":
                markers.append("thinking_cue")
            elif event["kind"] == "latency" and event["stage"] == "llm":
                markers.append("llm_done")
        assert markers.index("thinking_cue") < markers.index("llm_done")

    def test_recorder_receives_sample(self):
        from parley.metrics import LatencyRecorder

        recorder = LatencyRecorder()
        driver = make_driver("hi", recorder=recorder)
        driver.run_turn(text="hello")
        assert recorder.count() == 1

    def test_turn_while_not_idle_rejected(self):
        driver = make_driver("hi")
        driver.state = PipelineState(StateKind.THINKING)
        with pytest.raises(ContractError):
            driver.run_turn(text="hello")
