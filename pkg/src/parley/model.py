"""Core domain types: turns, history, observations, stage latencies, config.

Canonical serialization lives here too. Turn records use exactly the field
names turn_index, role, text, created_at, stage_latencies, emotion, objects;
the same records appear in transcript files and the event stream.
"""

from __future__ import annotations

import math
import re
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Iterable

from .errors import ContractError, IndexOrderError

# Weight units for history budgeting: one unit per 4 characters of text,
# a flat charge per attached image.
IMAGE_WEIGHT = 1000

_PART_LABEL_RE = re.compile(r"^[A-Z]$")


def text_weight(text: str) -> int:
    """Budget weight of a piece of text (ceil of quarter character count)."""
    return math.ceil(len(text) / 4)


def now_ms() -> int:
    """Current wall-clock time in integer milliseconds."""
    return time.time_ns() // 1_000_000


class Role(str, Enum):
    SYSTEM = "system"
    USER = "user"
    ASSISTANT = "assistant"
    VISUAL_OBSERVATION = "visual_observation"


class Stage(str, Enum):
    STT = "stt"
    VISION = "vision"
    LLM = "llm"
    TTS = "tts"
    RESIDUAL = "residual"
    TOTAL = "total"


# The stages a backend call can time out in.
BACKEND_STAGES = (Stage.STT, Stage.VISION, Stage.LLM, Stage.TTS)


class CameraRole(str, Enum):
    TASK_VIEW = "task_view"
    USER_VIEW = "user_view"


class EmotionLabel(str, Enum):
    NEUTRAL = "neutral"
    FRUSTRATED = "frustrated"
    ANXIOUS = "anxious"
    CONFIDENT = "confident"
    PROUD = "proud"
    OVERWHELMED = "overwhelmed"
    OTHER = "other"


@dataclass(frozen=True)
class EmotionTag:
    """Detected emotional state. ``detail`` names the emotion when label is OTHER."""

    label: EmotionLabel
    confidence: float = 1.0
    detail: str = ""

    def __post_init__(self):
        if not 0.0 <= self.confidence <= 1.0:
            raise ContractError(f"emotion confidence {self.confidence} outside [0, 1]")

    @classmethod
    def from_name(cls, name: str, confidence: float = 1.0) -> "EmotionTag":
        """Build a tag from a free-form label, falling back to OTHER."""
        normalized = name.strip().lower()
        try:
            return cls(EmotionLabel(normalized), confidence)
        except ValueError:
            return cls(EmotionLabel.OTHER, confidence, detail=normalized)

    @property
    def name(self) -> str:
        return self.detail if self.label is EmotionLabel.OTHER and self.detail else self.label.value

    def to_dict(self) -> dict:
        out: dict[str, Any] = {"label": self.label.value, "confidence": self.confidence}
        if self.detail:
            out["detail"] = self.detail
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "EmotionTag":
        return cls(
            label=EmotionLabel(data["label"]),
            confidence=float(data.get("confidence", 1.0)),
            detail=data.get("detail", ""),
        )


@dataclass(frozen=True)
class ObjectTag:
    """An object the backend identified in the camera frames."""

    name: str
    present: bool = True
    part_label: str | None = None

    def __post_init__(self):
        if self.part_label is not None and not _PART_LABEL_RE.match(self.part_label):
            raise ContractError(f"part_label {self.part_label!r} must be a single letter A-Z")

    def to_dict(self) -> dict:
        return {"name": self.name, "part_label": self.part_label, "present": self.present}

    @classmethod
    def from_dict(cls, data: dict) -> "ObjectTag":
        return cls(
            name=data["name"],
            present=bool(data.get("present", True)),
            part_label=data.get("part_label"),
        )


@dataclass(frozen=True)
class VisualObservation:
    """One captured camera frame, stored as an opaque reference."""

    camera_role: CameraRole
    image_ref: str | bytes
    captured_at: int
    capture_latency_ms: float = 0.0

    def __post_init__(self):
        if self.capture_latency_ms < 0:
            raise ContractError("capture_latency_ms must be non-negative")


@dataclass(frozen=True)
class StageLatencies:
    """Per-stage processing time of one turn, in milliseconds.

    ``residual_ms`` holds playback/orchestration time not attributed to the
    four backend stages, so that total_ms is an exact sum.
    """

    stt_ms: float
    vision_ms: float
    llm_ms: float
    tts_ms: float
    residual_ms: float
    total_ms: float

    def __post_init__(self):
        for name in ("stt_ms", "vision_ms", "llm_ms", "tts_ms", "residual_ms", "total_ms"):
            if getattr(self, name) < 0:
                raise ContractError(f"{name} must be non-negative")
        parts = self.stt_ms + self.vision_ms + self.llm_ms + self.tts_ms + self.residual_ms
        if not math.isclose(self.total_ms, parts, rel_tol=1e-9, abs_tol=1e-6):
            raise ContractError(
                f"total_ms {self.total_ms} does not equal the stage sum {parts}"
            )

    @classmethod
    def from_stages(
        cls, stt_ms: float, vision_ms: float, llm_ms: float, tts_ms: float, residual_ms: float
    ) -> "StageLatencies":
        return cls(
            stt_ms=stt_ms,
            vision_ms=vision_ms,
            llm_ms=llm_ms,
            tts_ms=tts_ms,
            residual_ms=residual_ms,
            total_ms=stt_ms + vision_ms + llm_ms + tts_ms + residual_ms,
        )

    def get(self, stage: Stage) -> float:
        return getattr(self, f"{stage.value}_ms")

    def to_dict(self) -> dict:
        return {
            "stt_ms": self.stt_ms,
            "vision_ms": self.vision_ms,
            "llm_ms": self.llm_ms,
            "tts_ms": self.tts_ms,
            "residual_ms": self.residual_ms,
            "total_ms": self.total_ms,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "StageLatencies":
        return cls(**{k: float(data[k]) for k in (
            "stt_ms", "vision_ms", "llm_ms", "tts_ms", "residual_ms", "total_ms")})


@dataclass(frozen=True)
class Turn:
    """One dialogue entry in a session's history."""

    turn_index: int
    role: Role
    text: str
    created_at: int
    stage_latencies: StageLatencies | None = None
    emotion: EmotionTag | None = None
    objects: tuple[ObjectTag, ...] = ()

    def __post_init__(self):
        if self.turn_index < 0:
            raise ContractError("turn_index must be non-negative")
        if self.role in (Role.USER, Role.ASSISTANT) and not self.text:
            raise ContractError(f"{self.role.value} turns must carry non-empty text")
        if not isinstance(self.objects, tuple):
            object.__setattr__(self, "objects", tuple(self.objects))

    @property
    def weight(self) -> int:
        return text_weight(self.text)

    def to_dict(self) -> dict:
        return {
            "turn_index": self.turn_index,
            "role": self.role.value,
            "text": self.text,
            "created_at": self.created_at,
            "stage_latencies": self.stage_latencies.to_dict() if self.stage_latencies else None,
            "emotion": self.emotion.to_dict() if self.emotion else None,
            "objects": [o.to_dict() for o in self.objects],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Turn":
        latencies = data.get("stage_latencies")
        emotion = data.get("emotion")
        return cls(
            turn_index=int(data["turn_index"]),
            role=Role(data["role"]),
            text=data["text"],
            created_at=int(data["created_at"]),
            stage_latencies=StageLatencies.from_dict(latencies) if latencies else None,
            emotion=EmotionTag.from_dict(emotion) if emotion else None,
            objects=tuple(ObjectTag.from_dict(o) for o in data.get("objects", [])),
        )


class ConversationHistory:
    """Weight-budgeted sliding window over the dialogue log.

    The system prompt is pinned and never evicted. Appending beyond the
    budget drops whole turns, oldest first, so the retained turns are always
    a contiguous suffix of everything appended.
    """

    def __init__(self, system_prompt: str, budget: int, turns: Iterable[Turn] = ()):
        if budget <= 0:
            raise ContractError("history budget must be positive")
        self.system_prompt = system_prompt
        self.budget = budget
        self.turns: list[Turn] = []
        self._next_index = 0
        for turn in turns:
            self.append(turn)

    def append(self, turn: Turn) -> "ConversationHistory":
        if turn.role is Role.SYSTEM:
            raise ContractError("system text lives in system_prompt, not in the turn log")
        if turn.turn_index != self._next_index:
            raise IndexOrderError(
                f"expected turn_index {self._next_index}, got {turn.turn_index}"
            )
        self.turns.append(turn)
        self._next_index = turn.turn_index + 1
        self._evict()
        return self

    def _evict(self) -> None:
        total = sum(t.weight for t in self.turns)
        while self.turns and total > self.budget:
            total -= self.turns[0].weight
            self.turns.pop(0)

    @property
    def next_index(self) -> int:
        return self._next_index

    @property
    def total_weight(self) -> int:
        return sum(t.weight for t in self.turns)

    def to_dict(self) -> dict:
        return {
            "system_prompt": self.system_prompt,
            "budget": self.budget,
            "turns": [t.to_dict() for t in self.turns],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ConversationHistory":
        history = cls(system_prompt=data["system_prompt"], budget=int(data["budget"]))
        for record in data.get("turns", []):
            turn = Turn.from_dict(record)
            # Restored windows may start mid-session; trust the stored indexes.
            history.turns.append(turn)
            history._next_index = turn.turn_index + 1
        history._evict()
        return history

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ConversationHistory):
            return NotImplemented
        return (
            self.system_prompt == other.system_prompt
            and self.budget == other.budget
            and self.turns == other.turns
        )

    def __repr__(self) -> str:
        return f"ConversationHistory(turns={len(self.turns)}, weight={self.total_weight}/{self.budget})"


DEFAULT_SYSTEM_PROMPT = (
    "You are a digital teammate assisting a human with a hands-on task. "
    "Use the conversation so far and any attached camera frames to answer "
    "with specific, actionable guidance, and acknowledge how the user seems "
    "to be feeling. After your reply, append one final line of the form "
    "`@@meta emotion=<label> objects=<name[:A-Z]:present|absent,...>` "
    "naming the user's apparent emotional state and any task-relevant "
    "objects you can identify in the frames."
)

DEFAULT_TIMEOUTS_MS = {
    Stage.STT: 10_000,
    Stage.VISION: 10_000,
    Stage.LLM: 60_000,
    Stage.TTS: 10_000,
}

DEFAULT_HISTORY_BUDGET = 8_000
DEFAULT_FEEDBACK_ATTEMPT_LIMIT = 5


@dataclass
class SessionConfig:
    """Per-session knobs: backend selection, timeouts, budget, loop limits."""

    backends: dict[str, str] = field(
        default_factory=lambda: {"stt": "mock", "vision": "mock", "llm": "mock", "tts": "mock"}
    )
    timeouts_ms: dict[Stage, int] = field(default_factory=lambda: dict(DEFAULT_TIMEOUTS_MS))
    history_budget: int = DEFAULT_HISTORY_BUDGET
    barge_in_enabled: bool = False
    feedback_attempt_limit: int = DEFAULT_FEEDBACK_ATTEMPT_LIMIT
    system_prompt: str = DEFAULT_SYSTEM_PROMPT

    def __post_init__(self):
        if self.history_budget <= 0:
            raise ContractError("history_budget must be positive")
        if self.feedback_attempt_limit <= 0:
            raise ContractError("feedback_attempt_limit must be positive")
        normalized: dict[Stage, int] = {}
        for stage, value in self.timeouts_ms.items():
            stage = Stage(stage)
            if value <= 0:
                raise ContractError(f"timeout for {stage.value} must be positive")
            normalized[stage] = int(value)
        for stage in BACKEND_STAGES:
            normalized.setdefault(stage, DEFAULT_TIMEOUTS_MS[stage])
        self.timeouts_ms = normalized
        missing = {"stt", "vision", "llm", "tts"} - set(self.backends)
        if missing:
            raise ContractError(f"backends missing stages: {sorted(missing)}")

    def timeout_for(self, stage: Stage) -> int:
        return self.timeouts_ms[stage]

    def to_dict(self) -> dict:
        return {
            "backends": dict(self.backends),
            "timeouts_ms": {s.value: v for s, v in self.timeouts_ms.items()},
            "history_budget": self.history_budget,
            "barge_in_enabled": self.barge_in_enabled,
            "feedback_attempt_limit": self.feedback_attempt_limit,
            "system_prompt": self.system_prompt,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SessionConfig":
        kwargs: dict[str, Any] = {}
        if "backends" in data:
            kwargs["backends"] = dict(data["backends"])
        if "timeouts_ms" in data:
            kwargs["timeouts_ms"] = {Stage(k): int(v) for k, v in data["timeouts_ms"].items()}
        for key in ("history_budget", "barge_in_enabled", "feedback_attempt_limit", "system_prompt"):
            if key in data and data[key] is not None:
                kwargs[key] = data[key]
        return cls(**kwargs)
