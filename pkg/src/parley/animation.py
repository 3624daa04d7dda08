"""Animation cues, reflex scheduling, and viseme lip-sync timelines.

Everything here is renderer-agnostic: the engine emits cue boundaries and
timed mouth shapes, a downstream renderer owns blending and playback.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from enum import Enum

from .errors import ContractError
from .model import EmotionTag


class CueKind(str, Enum):
    IDLE = "idle"
    THINKING = "thinking"
    SPEAKING = "speaking"
    EMOTION_OVERLAY = "emotion_overlay"


@dataclass(frozen=True)
class AnimationCue:
    kind: CueKind
    at: int
    emotion: EmotionTag | None = None

    def to_dict(self) -> dict:
        out = {"kind": self.kind.value, "at": self.at}
        if self.emotion:
            out["emotion"] = self.emotion.to_dict()
        return out


class ReflexKind(str, Enum):
    BLINK = "blink"
    BREATH = "breath"
    FIDDLE = "fiddle"


# Inter-arrival bounds in milliseconds.
BLINK_GAP_MS = (2_000, 8_000)
BREATH_GAP_MS = (3_000, 6_000)
FIDDLE_GAP_MS = (5_000, 15_000)


@dataclass(frozen=True)
class ReflexEvent:
    kind: ReflexKind
    at_ms: int

    def to_dict(self) -> dict:
        return {"kind": self.kind.value, "at_ms": self.at_ms}


def schedule_reflexes(span_ms: int, seed: int = 0) -> list[ReflexEvent]:
    """Seeded idle-motion plan for a span: blinks, breaths, fiddling.

    Same seed, same list. Blink gaps stay in [2s, 8s], breath gaps in
    [3s, 6s].
    """
    if span_ms <= 0:
        raise ContractError("span_ms must be positive")
    rng = random.Random(seed)
    events: list[ReflexEvent] = []
    for kind, (lo, hi) in (
        (ReflexKind.BLINK, BLINK_GAP_MS),
        (ReflexKind.BREATH, BREATH_GAP_MS),
        (ReflexKind.FIDDLE, FIDDLE_GAP_MS),
    ):
        at = rng.randint(lo, hi)
        while at <= span_ms:
            events.append(ReflexEvent(kind, at))
            at += rng.randint(lo, hi)
    events.sort(key=lambda e: (e.at_ms, e.kind.value))
    return events


# The ten mouth shapes. REST doubles as the closed-mouth tail; every
# remaining letter or digit falls into ETC.
class Viseme(str, Enum):
    REST = "rest"
    AI = "AI"
    E = "E"
    O = "O"
    U = "U"
    MBP = "MBP"
    FV = "FV"
    L = "L"
    WQ = "WQ"
    ETC = "etc"


_VISEME_FOR_CHAR: dict[str, Viseme] = {}
for _chars, _viseme in (
    ("ai", Viseme.AI),
    ("e", Viseme.E),
    ("o", Viseme.O),
    ("u", Viseme.U),
    ("mbp", Viseme.MBP),
    ("fv", Viseme.FV),
    ("l", Viseme.L),
    ("wq", Viseme.WQ),
    ("cdghjknrstxyz", Viseme.ETC),
):
    for _ch in _chars:
        _VISEME_FOR_CHAR[_ch] = _viseme

# Open-mouth vowels hold longer than consonants; rests pace like consonants.
_VOWEL_WEIGHT = 2
_CONSONANT_WEIGHT = 1


def _char_class(ch: str) -> tuple[Viseme, int]:
    lower = ch.lower()
    viseme = _VISEME_FOR_CHAR.get(lower)
    if viseme is None:
        if lower.isdigit():
            return Viseme.ETC, _CONSONANT_WEIGHT
        return Viseme.REST, _CONSONANT_WEIGHT
    if viseme in (Viseme.AI, Viseme.E, Viseme.O, Viseme.U):
        return viseme, _VOWEL_WEIGHT
    return viseme, _CONSONANT_WEIGHT


@dataclass(frozen=True)
class VisemeSegment:
    viseme: Viseme
    start_ms: int
    end_ms: int


@dataclass(frozen=True)
class VisemeTrack:
    """Gap-free, non-overlapping mouth-shape timeline covering the audio span."""

    segments: tuple[VisemeSegment, ...]
    total_duration_ms: int

    def to_dict(self) -> dict:
        return {
            "segments": [[s.viseme.value, s.start_ms, s.end_ms] for s in self.segments],
            "total_duration_ms": self.total_duration_ms,
        }


# Closed-mouth tail: at least 50 ms or 2% of the utterance, whichever is larger.
_TAIL_MIN_MS = 50
_TAIL_FRACTION = 0.02


def _runs(text: str) -> list[tuple[Viseme, int]]:
    """Run-length encode the text into (viseme, weight) runs."""
    runs: list[tuple[Viseme, int]] = []
    for ch in text:
        viseme, weight = _char_class(ch)
        if runs and runs[-1][0] is viseme:
            runs[-1] = (viseme, runs[-1][1] + weight)
        else:
            runs.append((viseme, weight))
    return runs


def generate_visemes(text: str, duration_ms: float) -> VisemeTrack:
    """Timeline of mouth shapes for ``text`` spoken over ``duration_ms``.

    Time is allotted to character runs in proportion to their weights using
    exact integer boundaries, then a closed-mouth tail is appended. Empty
    text (and only empty text) may come with a zero duration, which yields
    the degenerate single zero-length rest segment.
    """
    duration = int(round(duration_ms))
    if text and duration <= 0:
        raise ContractError("non-empty text requires a positive duration")
    if duration < 0:
        raise ContractError("duration_ms must not be negative")
    if duration == 0:
        return VisemeTrack(segments=(VisemeSegment(Viseme.REST, 0, 0),), total_duration_ms=0)

    tail = max(_TAIL_MIN_MS, int(round(duration * _TAIL_FRACTION)))
    tail = min(tail, duration)
    span = duration - tail

    runs = _runs(text)
    total_weight = sum(w for _, w in runs)
    segments: list[VisemeSegment] = []
    if span > 0 and total_weight > 0:
        # Cumulative integer boundaries: coverage is exact by construction.
        cursor = 0
        prefix = 0
        for viseme, weight in runs:
            prefix += weight
            end = span * prefix // total_weight
            if end > cursor:
                segments.append(VisemeSegment(viseme, cursor, end))
                cursor = end
    else:
        span = 0

    start_of_tail = segments[-1].end_ms if segments else 0
    if segments and segments[-1].viseme is Viseme.REST:
        start_of_tail = segments[-1].start_ms
        segments.pop()
    segments.append(VisemeSegment(Viseme.REST, start_of_tail, duration))
    return VisemeTrack(segments=tuple(segments), total_duration_ms=duration)
