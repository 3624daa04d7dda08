"""The per-session interaction state machine and the turn driver.

``step`` is a pure, total transition function over (state, event): it never
raises on an unexpected pair, it answers with the unchanged state and an
IgnoredEvent action. The driver owns the effects: it runs the backends,
feeds their completions back in as events, and acts on the actions the
machine emits.

One turn flows Idle -> Listening -> Transcribing -> Thinking -> Speaking ->
Idle. Camera capture runs alongside listening/transcription and is joined
before the prompt is submitted; a stage timeout faults the session until it
is reset.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Callable

from .adapters.base import BackendSet, ResponseEnvelope
from .animation import AnimationCue, CueKind, generate_visemes, schedule_reflexes
from .errors import ContractError, StageTimeoutError, TurnAbortedError
from .metrics import LatencyRecorder
from .model import (
    ConversationHistory,
    EmotionTag,
    Role,
    SessionConfig,
    Stage,
    StageLatencies,
    Turn,
    VisualObservation,
    now_ms,
)
from .prompt import ConstructedPrompt, construct

logger = logging.getLogger(__name__)


class StateKind(str, Enum):
    IDLE = "idle"
    LISTENING = "listening"
    TRANSCRIBING = "transcribing"
    THINKING = "thinking"
    SPEAKING = "speaking"
    FAULTED = "faulted"


@dataclass(frozen=True)
class PipelineState:
    """State kind plus the join bookkeeping for in-flight stage completions."""

    kind: StateKind
    visual_done: bool = False
    prompt_submitted: bool = False
    llm_done: bool = False
    fault_stage: str | None = None
    fault_reason: str | None = None

    def to_dict(self) -> dict:
        out: dict = {"state": self.kind.value}
        if self.kind is StateKind.FAULTED:
            out["fault_stage"] = self.fault_stage
            out["fault_reason"] = self.fault_reason
        return out


IDLE = PipelineState(StateKind.IDLE)


def faulted(stage: str, reason: str) -> PipelineState:
    return PipelineState(StateKind.FAULTED, fault_stage=stage, fault_reason=reason)


# ---------------------------------------------------------------------------
# Events


@dataclass(frozen=True)
class PipelineEvent:
    pass


@dataclass(frozen=True)
class UserSpeechStart(PipelineEvent):
    pass


@dataclass(frozen=True)
class UserSpeechEnd(PipelineEvent):
    audio_ref: str | None = None


@dataclass(frozen=True)
class TranscriptReady(PipelineEvent):
    text: str
    latency_ms: float


@dataclass(frozen=True)
class VisualCaptured(PipelineEvent):
    observations: tuple[VisualObservation, ...]

    @property
    def latency_ms(self) -> float:
        # Cameras fire concurrently, so the stage takes as long as the
        # slowest capture.
        return max((o.capture_latency_ms for o in self.observations), default=0.0)


@dataclass(frozen=True)
class LlmResponseReady(PipelineEvent):
    envelope: ResponseEnvelope
    latency_ms: float


@dataclass(frozen=True)
class AudioReady(PipelineEvent):
    audio_ref: str
    duration_ms: float
    latency_ms: float


@dataclass(frozen=True)
class SpeechPlaybackComplete(PipelineEvent):
    pass


@dataclass(frozen=True)
class StageTimeout(PipelineEvent):
    stage: str
    reason: str = "timeout"


@dataclass(frozen=True)
class Reset(PipelineEvent):
    pass


# ---------------------------------------------------------------------------
# Actions


@dataclass(frozen=True)
class Action:
    pass


@dataclass(frozen=True)
class StartTranscription(Action):
    # None means "prepare": the utterance is still being captured.
    audio_ref: str | None = None


@dataclass(frozen=True)
class CaptureFrames(Action):
    pass


@dataclass(frozen=True)
class SubmitPrompt(Action):
    pass


@dataclass(frozen=True)
class SynthesizeSpeech(Action):
    text: str


@dataclass(frozen=True)
class EmitAnimationCue(Action):
    kind: CueKind
    emotion: EmotionTag | None = None


@dataclass(frozen=True)
class RecordLatency(Action):
    stage: Stage
    ms: float


@dataclass(frozen=True)
class CommitTurn(Action):
    pass


@dataclass(frozen=True)
class IgnoredEvent(Action):
    pass


_LISTEN_ACTIONS = (CaptureFrames(), StartTranscription(None))


def step(
    state: PipelineState, event: PipelineEvent, barge_in_enabled: bool = False
) -> tuple[PipelineState, tuple[Action, ...]]:
    """Pure transition: same (state, event) pair, same result, always."""
    ignored = (state, (IgnoredEvent(),))

    if isinstance(event, StageTimeout):
        return faulted(event.stage, event.reason), (EmitAnimationCue(CueKind.IDLE),)

    if state.kind is StateKind.FAULTED:
        if isinstance(event, Reset):
            return IDLE, ()
        return ignored

    if state.kind is StateKind.IDLE:
        if isinstance(event, UserSpeechStart):
            return PipelineState(StateKind.LISTENING), _LISTEN_ACTIONS
        return ignored

    if state.kind is StateKind.LISTENING:
        if isinstance(event, UserSpeechEnd):
            return (
                replace(state, kind=StateKind.TRANSCRIBING),
                (StartTranscription(event.audio_ref),),
            )
        if isinstance(event, VisualCaptured) and not state.visual_done:
            return (
                replace(state, visual_done=True),
                (RecordLatency(Stage.VISION, event.latency_ms),),
            )
        return ignored

    if state.kind is StateKind.TRANSCRIBING:
        if isinstance(event, TranscriptReady):
            if not event.text.strip():
                # Nothing was said; the turn dissolves.
                return IDLE, (IgnoredEvent(),)
            actions: list[Action] = [EmitAnimationCue(CueKind.THINKING)]
            if state.visual_done:
                actions.append(SubmitPrompt())
            actions.append(RecordLatency(Stage.STT, event.latency_ms))
            return (
                PipelineState(
                    StateKind.THINKING,
                    visual_done=state.visual_done,
                    prompt_submitted=state.visual_done,
                ),
                tuple(actions),
            )
        if isinstance(event, VisualCaptured) and not state.visual_done:
            return (
                replace(state, visual_done=True),
                (RecordLatency(Stage.VISION, event.latency_ms),),
            )
        return ignored

    if state.kind is StateKind.THINKING:
        if isinstance(event, VisualCaptured) and not state.visual_done:
            return (
                replace(state, visual_done=True, prompt_submitted=True),
                (SubmitPrompt(), RecordLatency(Stage.VISION, event.latency_ms)),
            )
        if isinstance(event, LlmResponseReady) and state.prompt_submitted and not state.llm_done:
            actions = []
            if event.envelope.emotion is not None:
                actions.append(
                    EmitAnimationCue(CueKind.EMOTION_OVERLAY, emotion=event.envelope.emotion)
                )
            actions.append(SynthesizeSpeech(event.envelope.reply_text))
            actions.append(RecordLatency(Stage.LLM, event.latency_ms))
            return replace(state, llm_done=True), tuple(actions)
        if isinstance(event, AudioReady) and state.llm_done:
            return (
                PipelineState(StateKind.SPEAKING),
                (EmitAnimationCue(CueKind.SPEAKING), RecordLatency(Stage.TTS, event.latency_ms)),
            )
        return ignored

    if state.kind is StateKind.SPEAKING:
        if isinstance(event, SpeechPlaybackComplete):
            return IDLE, (CommitTurn(), EmitAnimationCue(CueKind.IDLE))
        if isinstance(event, UserSpeechStart):
            if barge_in_enabled:
                # Interrupt playback; the unplayed audio is discarded by the
                # driver because Speaking was left without a commit.
                return PipelineState(StateKind.LISTENING), _LISTEN_ACTIONS
            return ignored
        return ignored

    return ignored  # pragma: no cover - all kinds handled above


# ---------------------------------------------------------------------------
# Turn records and the driver


@dataclass(frozen=True)
class TurnRecord:
    """Everything one completed turn produced."""

    user_text: str
    assistant_text: str
    observations: tuple[VisualObservation, ...]
    envelope: ResponseEnvelope
    stage_latencies: StageLatencies
    user_turn_index: int
    assistant_turn_index: int


EventSink = Callable[[dict], None]
PersistFn = Callable[[Turn, Turn], None]


@dataclass
class PipelineDriver:
    """Drives one session's turns through the state machine.

    Callers provide the backends, the history to append to, and optional
    sinks for the event stream, persistence, and metrics. The driver holds
    the session's current state; one turn is in flight at a time.
    """

    config: SessionConfig
    backends: BackendSet
    history: ConversationHistory
    session_id: str = "local"
    emit: EventSink | None = None
    persist: PersistFn | None = None
    recorder: LatencyRecorder | None = None
    clock: Callable[[], int] = now_ms
    reflex_seed: int = 0
    state: PipelineState = field(default=IDLE)

    def _emit(self, record: dict) -> None:
        if self.emit is not None:
            self.emit(record)

    def _emit_cue(self, kind: CueKind, emotion: EmotionTag | None = None) -> None:
        cue = AnimationCue(kind=kind, at=self.clock(), emotion=emotion)
        record: dict = {"kind": "cue", "cue": cue.kind.value, "at": cue.at}
        if cue.emotion is not None:
            record["emotion"] = cue.emotion.to_dict()
        self._emit(record)

    def dispatch(self, event: PipelineEvent) -> tuple[Action, ...]:
        """Advance the machine one event and publish what happened."""
        before = self.state
        self.state, actions = step(self.state, event, self.config.barge_in_enabled)
        # Join-progress flags are internal; only externally visible changes
        # (the state kind or fault details) hit the event stream.
        if self.state.to_dict() != before.to_dict():
            self._emit({"kind": "state", **self.state.to_dict()})
        for action in actions:
            if isinstance(action, RecordLatency):
                self._emit(
                    {"kind": "latency", "stage": action.stage.value, "ms": action.ms}
                )
            elif isinstance(action, EmitAnimationCue):
                self._emit_cue(action.kind, action.emotion)
            elif isinstance(action, IgnoredEvent):
                self._emit({"kind": "action", "action": "ignored_event",
                            "event": type(event).__name__})
            elif not isinstance(action, CommitTurn):
                self._emit({"kind": "action", "action": _action_name(action)})
        return actions

    def reset(self) -> None:
        self.dispatch(Reset())

    # -- stage helpers ------------------------------------------------------

    def _fault(self, stage: Stage, reason: str = "timeout") -> "TurnAbortedError":
        self.dispatch(StageTimeout(stage.value, reason))
        self._emit({"kind": "turn_aborted", "stage": stage.value, "reason": reason})
        return TurnAbortedError(stage.value, f"{stage.value}: {reason}")

    def _check_timeout(self, stage: Stage, latency_ms: float) -> None:
        if latency_ms > self.config.timeout_for(stage):
            raise self._fault(stage)

    def _capture_frames(self) -> tuple[VisualObservation, ...]:
        observations = []
        for role in self.backends.capture_roles:
            try:
                observation = self.backends.vision.capture(role)
            except StageTimeoutError as exc:
                raise self._fault(Stage.VISION, str(exc)) from exc
            self._check_timeout(Stage.VISION, observation.capture_latency_ms)
            observations.append(observation)
        return tuple(observations)

    def run_turn(
        self, text: str | None = None, audio_ref: str | None = None
    ) -> TurnRecord | None:
        """Run one full turn from either a text utterance or an audio ref.

        Returns None when the transcript came back empty (no turn happened).
        A stage timeout raises TurnAbortedError and leaves the session
        Faulted until reset; nothing is persisted for an aborted turn.
        """
        if self.state.kind is not StateKind.IDLE:
            raise ContractError(f"session is {self.state.kind.value}, not idle")
        if text is None and audio_ref is None:
            raise ContractError("provide text or audio_ref")

        latencies: dict[Stage, float] = {}

        def note_latencies(actions: tuple[Action, ...]) -> None:
            for action in actions:
                if isinstance(action, RecordLatency):
                    latencies[action.stage] = action.ms

        actions = self.dispatch(UserSpeechStart())
        observations: tuple[VisualObservation, ...] = ()
        if any(isinstance(a, CaptureFrames) for a in actions):
            observations = self._capture_frames()

        self.dispatch(UserSpeechEnd(audio_ref))

        if text is not None:
            transcript = TranscriptReady(text=text, latency_ms=0.0)
        else:
            try:
                result = self.backends.stt.transcribe(audio_ref)
            except StageTimeoutError as exc:
                raise self._fault(Stage.STT, str(exc)) from exc
            self._check_timeout(Stage.STT, result.latency_ms)
            transcript = TranscriptReady(text=result.text, latency_ms=result.latency_ms)

        actions = self.dispatch(transcript)
        note_latencies(actions)
        if self.state.kind is StateKind.IDLE:
            return None  # empty utterance

        actions = self.dispatch(VisualCaptured(observations))
        note_latencies(actions)

        envelope: ResponseEnvelope | None = None
        if any(isinstance(a, SubmitPrompt) for a in actions):
            prompt = construct(self.history, transcript.text, observations)
            try:
                envelope = self.backends.llm.complete(prompt)
            except StageTimeoutError as exc:
                raise self._fault(Stage.LLM, str(exc)) from exc
            self._check_timeout(Stage.LLM, envelope.latency_ms)
        if envelope is None:  # pragma: no cover - joins guarantee submission
            raise ContractError("prompt was never submitted")

        actions = self.dispatch(LlmResponseReady(envelope, envelope.latency_ms))
        note_latencies(actions)

        synthesize = next((a for a in actions if isinstance(a, SynthesizeSpeech)), None)
        if synthesize is None:  # pragma: no cover
            raise ContractError("no speech to synthesize")
        try:
            tts_result = self.backends.tts.synthesize(synthesize.text)
        except StageTimeoutError as exc:
            raise self._fault(Stage.TTS, str(exc)) from exc
        self._check_timeout(Stage.TTS, tts_result.latency_ms)

        actions = self.dispatch(
            AudioReady(tts_result.audio_ref, tts_result.duration_ms, tts_result.latency_ms)
        )
        note_latencies(actions)

        track = generate_visemes(envelope.reply_text, tts_result.duration_ms)
        self._emit({"kind": "viseme_track", **track.to_dict()})
        reflexes = schedule_reflexes(
            max(1, int(tts_result.duration_ms)),
            seed=self.reflex_seed + self.history.next_index,
        )
        self._emit({"kind": "reflex_track", "events": [r.to_dict() for r in reflexes]})

        actions = self.dispatch(SpeechPlaybackComplete())
        if not any(isinstance(a, CommitTurn) for a in actions):  # pragma: no cover
            raise ContractError("turn completed without a commit")

        # Playback is the unattributed remainder of the pipeline.
        stage_latencies = StageLatencies.from_stages(
            stt_ms=latencies.get(Stage.STT, 0.0),
            vision_ms=latencies.get(Stage.VISION, 0.0),
            llm_ms=latencies.get(Stage.LLM, 0.0),
            tts_ms=latencies.get(Stage.TTS, 0.0),
            residual_ms=tts_result.duration_ms,
        )

        created = self.clock()
        user_turn = Turn(
            turn_index=self.history.next_index,
            role=Role.USER,
            text=transcript.text,
            created_at=created,
        )
        assistant_turn = Turn(
            turn_index=user_turn.turn_index + 1,
            role=Role.ASSISTANT,
            text=envelope.reply_text,
            created_at=self.clock(),
            stage_latencies=stage_latencies,
            emotion=envelope.emotion,
            objects=envelope.objects,
        )
        self.history.append(user_turn)
        self.history.append(assistant_turn)
        if self.persist is not None:
            self.persist(user_turn, assistant_turn)
        if self.recorder is not None:
            self.recorder.record(self.session_id, stage_latencies)

        record = TurnRecord(
            user_text=transcript.text,
            assistant_text=envelope.reply_text,
            observations=observations,
            envelope=envelope,
            stage_latencies=stage_latencies,
            user_turn_index=user_turn.turn_index,
            assistant_turn_index=assistant_turn.turn_index,
        )
        self._emit(
            {
                "kind": "turn_committed",
                "user_turn_index": record.user_turn_index,
                "assistant_turn_index": record.assistant_turn_index,
                "user_text": record.user_text,
                "assistant_text": record.assistant_text,
                "emotion": envelope.emotion.to_dict() if envelope.emotion else None,
                "total_ms": stage_latencies.total_ms,
            }
        )
        return record


def _action_name(action: Action) -> str:
    name = type(action).__name__
    out = []
    for i, ch in enumerate(name):
        if ch.isupper() and i:
            out.append("_")
        out.append(ch.lower())
    return "".join(out)
