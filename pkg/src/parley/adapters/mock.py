"""Deterministic mock backends.

Mocks never sleep; scripted latencies are reported as metadata. The same
script and the same inputs always produce byte-identical outputs.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

from ..errors import ContractError, MediaError, ScriptExhaustedError
from ..model import CameraRole, EmotionTag, ObjectTag, VisualObservation
from ..prompt import ConstructedPrompt
from .base import (
    ChatBackend,
    ResponseEnvelope,
    SpeechSynthesis,
    SpeechToText,
    SttResult,
    TtsResult,
    VisionCapture,
    format_meta_trailer,
    parse_meta_trailer,
    require_valid_prompt,
)

# Mock speech rate: 150 words per minute.
_MS_PER_WORD = 60_000 / 150

DEFAULT_STT_LATENCY_MS = 1_300.0
DEFAULT_VISION_LATENCY_MS = 2_130.0
DEFAULT_LLM_LATENCY_MS = 9_720.0
DEFAULT_TTS_LATENCY_MS = 930.0


@dataclass(frozen=True)
class ScriptEntry:
    """One scripted exchange: what the user says and how the twin answers."""

    reply_text: str
    match: str = ""
    match_mode: str = "prefix"  # "exact" or "prefix"; empty match accepts anything
    emotion: EmotionTag | None = None
    objects: tuple[ObjectTag, ...] = ()
    latency_ms: dict = field(default_factory=dict)

    def matches(self, user_text: str) -> bool:
        if not self.match:
            return True
        if self.match_mode == "exact":
            return user_text == self.match
        return user_text.startswith(self.match)

    @classmethod
    def from_dict(cls, data: dict) -> "ScriptEntry":
        emotion = data.get("emotion")
        if isinstance(emotion, str):
            emotion = EmotionTag.from_name(emotion)
        elif isinstance(emotion, dict):
            emotion = EmotionTag.from_name(emotion["label"], float(emotion.get("confidence", 1.0)))
        objects = tuple(ObjectTag.from_dict(o) for o in data.get("objects", []))
        return cls(
            reply_text=data["reply_text"],
            match=data.get("match", ""),
            match_mode=data.get("match_mode", "prefix"),
            emotion=emotion,
            objects=objects,
            latency_ms=dict(data.get("latency_ms", {})),
        )


@dataclass
class MockScript:
    """Ordered scripted exchanges, consumed sequentially or by pattern."""

    entries: list[ScriptEntry]
    mode: str = "sequential"  # or "pattern"

    def __post_init__(self):
        if self.mode not in ("sequential", "pattern"):
            raise ContractError(f"unknown script mode {self.mode!r}")
        self._cursor = 0
        self._consumed: set[int] = set()

    @classmethod
    def from_dict(cls, data: dict) -> "MockScript":
        if "scripts" in data:
            # Per-scenario suite file: flatten in declared order and match by
            # pattern, so one live backend can serve any scenario's exchanges.
            entries = [
                ScriptEntry.from_dict(e)
                for section in data["scripts"].values()
                for e in section
            ]
            return cls(entries=entries, mode="pattern")
        return cls(
            entries=[ScriptEntry.from_dict(e) for e in data.get("entries", [])],
            mode=data.get("mode", "sequential"),
        )

    @classmethod
    def load(cls, path: str | Path) -> "MockScript":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))

    def take(self, user_text: str) -> ScriptEntry:
        """Next entry for this utterance; raises when the script runs dry."""
        if self.mode == "sequential":
            if self._cursor >= len(self.entries):
                raise ScriptExhaustedError(
                    f"script exhausted after {self._cursor} exchanges (got {user_text!r})"
                )
            entry = self.entries[self._cursor]
            if entry.match and not entry.matches(user_text):
                raise ScriptExhaustedError(
                    f"script expected {entry.match!r} at exchange {self._cursor}, got {user_text!r}"
                )
            self._cursor += 1
            return entry
        for idx, entry in enumerate(self.entries):
            if idx in self._consumed:
                continue
            if entry.matches(user_text):
                self._consumed.add(idx)
                return entry
        raise ScriptExhaustedError(f"no unconsumed script entry matches {user_text!r}")

    def reset(self) -> None:
        self._cursor = 0
        self._consumed.clear()


class MockStt(SpeechToText):
    """Maps audio refs to scripted transcripts."""

    def __init__(
        self,
        transcripts: dict[str, str] | None = None,
        latency_ms: float = DEFAULT_STT_LATENCY_MS,
        default_text: str | None = None,
    ):
        self.transcripts = dict(transcripts or {})
        self.latency_ms = latency_ms
        self.default_text = default_text

    def transcribe(self, audio_ref: str) -> SttResult:
        if audio_ref in self.transcripts:
            return SttResult(text=self.transcripts[audio_ref], latency_ms=self.latency_ms)
        if self.default_text is not None:
            return SttResult(text=self.default_text, latency_ms=self.latency_ms)
        raise MediaError(f"unresolvable audio ref {audio_ref!r}")


class MockVision(VisionCapture):
    """Returns named fixture frames per camera."""

    def __init__(
        self,
        fixtures: dict[CameraRole, str] | None = None,
        latency_ms: float = DEFAULT_VISION_LATENCY_MS,
        clock=None,
    ):
        from ..model import now_ms

        self.fixtures = fixtures or {
            CameraRole.TASK_VIEW: "parts_all_present",
            CameraRole.USER_VIEW: "user_neutral",
        }
        self.latency_ms = latency_ms
        self._clock = clock or now_ms

    def capture(self, camera_role: CameraRole) -> VisualObservation:
        try:
            camera_role = CameraRole(camera_role)
        except ValueError:
            raise MediaError(f"unknown camera role {camera_role!r}") from None
        if camera_role not in self.fixtures:
            raise MediaError(f"no fixture configured for camera {camera_role.value}")
        return VisualObservation(
            camera_role=camera_role,
            image_ref=f"fixture:{self.fixtures[camera_role]}",
            captured_at=self._clock(),
            capture_latency_ms=self.latency_ms,
        )


class MockChat(ChatBackend):
    """Plays a MockScript through the real trailer encode/parse path."""

    def __init__(self, script: MockScript, default_latency_ms: float = DEFAULT_LLM_LATENCY_MS):
        self.script = script
        self.default_latency_ms = default_latency_ms

    def complete(self, prompt: ConstructedPrompt) -> ResponseEnvelope:
        require_valid_prompt(prompt)
        entry = self.script.take(prompt.user_text)
        trailer = format_meta_trailer(entry.emotion, entry.objects)
        raw_reply = entry.reply_text + ("\n" + trailer if trailer else "")
        clean, emotion, objects = parse_meta_trailer(raw_reply)
        return ResponseEnvelope(
            reply_text=clean,
            emotion=emotion,
            objects=objects,
            raw=raw_reply,
            latency_ms=float(entry.latency_ms.get("llm", self.default_latency_ms)),
        )


class EchoChat(ChatBackend):
    """Script-free deterministic backend for live demo sessions."""

    def __init__(self, latency_ms: float = 400.0):
        self.latency_ms = latency_ms

    def complete(self, prompt: ConstructedPrompt) -> ResponseEnvelope:
        require_valid_prompt(prompt)
        user_text = prompt.user_text
        attachments = len(prompt.messages[-1].attachments)
        raw_reply = (
            f"I hear you: \"{user_text}\". I am looking at {attachments} camera "
            "frame(s) and standing by for the next step.\n"
            "@@meta emotion=neutral"
        )
        clean, emotion, objects = parse_meta_trailer(raw_reply)
        return ResponseEnvelope(
            reply_text=clean,
            emotion=emotion,
            objects=objects,
            raw=raw_reply,
            latency_ms=self.latency_ms,
        )


class MockTts(SpeechSynthesis):
    """Deterministic synthesis: duration follows a 150 wpm speech rate."""

    def __init__(self, latency_ms: float = DEFAULT_TTS_LATENCY_MS):
        self.latency_ms = latency_ms

    def synthesize(self, text: str) -> TtsResult:
        if not text:
            raise ContractError("cannot synthesize empty text")
        words = max(1, len(text.split()))
        digest = hashlib.sha256(text.encode("utf-8")).hexdigest()[:12]
        return TtsResult(
            audio_ref=f"mock-audio:{digest}",
            duration_ms=_MS_PER_WORD * words,
            latency_ms=self.latency_ms,
        )
