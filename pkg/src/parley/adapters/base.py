"""Abstract backend contracts and the metadata trailer protocol.

Chat backends convey detected objects and emotions by appending one line of
the form

    @@meta emotion=<label>[:confidence] objects=<name>[<A-Z>]:present|absent,...

to the reply. ``objects`` must be the last key on the line because object
names may contain spaces. The adapter strips the trailer before the reply
reaches the rest of the engine.
"""

from __future__ import annotations

import re
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Any

from ..errors import ContractError
from ..model import CameraRole, EmotionTag, ObjectTag, VisualObservation
from ..prompt import ConstructedPrompt

META_PREFIX = "@@meta"

_EMOTION_RE = re.compile(r"\bemotion=(\S+)")
_OBJECTS_RE = re.compile(r"\bobjects=(.+)$")
_OBJECT_ITEM_RE = re.compile(r"^(?P<name>[^:\[\]]+?)(?:\[(?P<label>[A-Z])\])?:(?P<state>present|absent)$")


@dataclass(frozen=True)
class SttResult:
    text: str
    latency_ms: float

    def __post_init__(self):
        if self.latency_ms < 0:
            raise ContractError("latency_ms must be non-negative")


@dataclass(frozen=True)
class TtsResult:
    audio_ref: str
    duration_ms: float
    latency_ms: float

    def __post_init__(self):
        if self.duration_ms <= 0:
            raise ContractError("duration_ms must be positive")
        if self.latency_ms < 0:
            raise ContractError("latency_ms must be non-negative")


@dataclass(frozen=True)
class ResponseEnvelope:
    """Chat backend reply with parsed object/emotion metadata."""

    reply_text: str
    emotion: EmotionTag | None = None
    objects: tuple[ObjectTag, ...] = ()
    raw: Any = None
    latency_ms: float = 0.0

    def __post_init__(self):
        if not self.reply_text:
            raise ContractError("reply_text must be non-empty")
        if not isinstance(self.objects, tuple):
            object.__setattr__(self, "objects", tuple(self.objects))


def format_meta_trailer(emotion: EmotionTag | None, objects: tuple[ObjectTag, ...]) -> str:
    """Render the trailer line for a reply; empty string when nothing to say."""
    parts = [META_PREFIX]
    if emotion is not None:
        token = emotion.name
        if emotion.confidence != 1.0:
            token += f":{emotion.confidence:g}"
        parts.append(f"emotion={token}")
    if objects:
        items = []
        for obj in objects:
            name = obj.name
            if obj.part_label:
                name += f"[{obj.part_label}]"
            items.append(f"{name}:{'present' if obj.present else 'absent'}")
        parts.append("objects=" + ",".join(items))
    if len(parts) == 1:
        return ""
    return " ".join(parts)


def parse_meta_trailer(text: str) -> tuple[str, EmotionTag | None, tuple[ObjectTag, ...]]:
    """Split a backend reply into (clean text, emotion, objects).

    A reply without a trailer passes through with empty tags. A trailer
    that cannot be parsed is left in place rather than guessed at.
    """
    lines = text.rstrip().split("\n")
    last = lines[-1].strip()
    if not last.startswith(META_PREFIX):
        return text, None, ()

    emotion: EmotionTag | None = None
    match = _EMOTION_RE.search(last)
    if match:
        token = match.group(1)
        name, _, conf = token.partition(":")
        confidence = float(conf) if conf else 1.0
        emotion = EmotionTag.from_name(name, confidence)

    objects: list[ObjectTag] = []
    match = _OBJECTS_RE.search(last)
    if match:
        for item in match.group(1).split(","):
            item = item.strip()
            if not item:
                continue
            parsed = _OBJECT_ITEM_RE.match(item)
            if not parsed:
                continue
            objects.append(
                ObjectTag(
                    name=parsed.group("name").strip(),
                    part_label=parsed.group("label"),
                    present=parsed.group("state") == "present",
                )
            )

    clean = "\n".join(lines[:-1]).rstrip()
    return clean, emotion, tuple(objects)


def require_valid_prompt(prompt: ConstructedPrompt) -> None:
    """Shared precondition for chat backends."""
    from ..model import Role
    from ..errors import ProtocolError

    if not prompt.messages:
        raise ProtocolError("prompt has no messages")
    if prompt.messages[0].role is not Role.SYSTEM:
        raise ProtocolError("prompt must begin with the system message")


class SpeechToText(ABC):
    @abstractmethod
    def transcribe(self, audio_ref: str) -> SttResult:
        """Turn an utterance into text, reporting the stage latency."""


class VisionCapture(ABC):
    @abstractmethod
    def capture(self, camera_role: CameraRole) -> VisualObservation:
        """Grab one frame from the named camera."""


class ChatBackend(ABC):
    @abstractmethod
    def complete(self, prompt: ConstructedPrompt) -> ResponseEnvelope:
        """Generate the reply for a constructed prompt."""


class SpeechSynthesis(ABC):
    @abstractmethod
    def synthesize(self, text: str) -> TtsResult:
        """Render reply text to audio, reporting duration and latency."""


@dataclass
class BackendSet:
    """The four backends a session drives its turns through."""

    stt: SpeechToText
    vision: VisionCapture
    llm: ChatBackend
    tts: SpeechSynthesis
    capture_roles: tuple[CameraRole, ...] = field(
        default=(CameraRole.TASK_VIEW, CameraRole.USER_VIEW)
    )
