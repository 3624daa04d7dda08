"""Viseme timelines and reflex scheduling."""

import random

import pytest

from parley.errors import ContractError
from parley.animation import (
    ReflexKind,
    Viseme,
    VisemeSegment,
    generate_visemes,
    schedule_reflexes,
)


def check_track_invariants(track, duration):
    segments = track.segments
    assert track.total_duration_ms == duration
    assert len(segments) >= 1
    if duration == 0:
        assert segments == (VisemeSegment(Viseme.REST, 0, 0),)
        return
    assert segments[0].start_ms == 0
    assert segments[-1].end_ms == duration
    assert segments[-1].viseme is Viseme.REST
    for i, seg in enumerate(segments):
        assert seg.start_ms < seg.end_ms
        if i:
            assert seg.start_ms == segments[i - 1].end_ms
    assert sum(s.end_ms - s.start_ms for s in segments) == duration


def test_empty_text_zero_duration_degenerate():
    track = generate_visemes("", 0)
    assert track.total_duration_ms == 0
    assert track.segments == (VisemeSegment(Viseme.REST, 0, 0),)


def test_empty_text_positive_duration_is_single_rest():
    track = generate_visemes("", 750)
    check_track_invariants(track, 750)
    assert len(track.segments) == 1


def test_mama_hand_derived():
    # Runs m/a/m/a weigh 1,2,1,2 (total 6). Tail = max(50, 2% of 1000) = 50,
    # speech span 950. Integer boundaries: 950*1//6, 950*3//6, 950*4//6, 950.
    track = generate_visemes("mama", 1000)
    assert track.segments == (
        VisemeSegment(Viseme.MBP, 0, 158),
        VisemeSegment(Viseme.AI, 158, 475),
        VisemeSegment(Viseme.MBP, 475, 633),
        VisemeSegment(Viseme.AI, 633, 950),
        VisemeSegment(Viseme.REST, 950, 1000),
    )
    check_track_invariants(track, 1000)


def test_nonpositive_duration_with_text_rejected():
    with pytest.raises(ContractError):
        generate_visemes("hello", 0)
    with pytest.raises(ContractError):
        generate_visemes("hello", -5)


def test_trailing_spaces_merge_into_tail():
    track = generate_visemes("go  ", 600)
    check_track_invariants(track, 600)
    rests = [s for s in track.segments if s.viseme is Viseme.REST]
    assert len(rests) == 1  # trailing rest run merged with the closed-mouth tail


def test_coverage_randomized():
    rng = random.Random(4)
    alphabet = "abcdefghijklmnopqrstuvwxyz ,.!?0123456789"
    for _ in range(300):
        text = "".join(rng.choice(alphabet) for _ in range(rng.randint(0, 60)))
        duration = rng.randint(1, 30_000)
        track = generate_visemes(text, duration)
        check_track_invariants(track, duration)


class TestReflexes:
    def test_bounds_on_ten_seconds(self):
        events = schedule_reflexes(10_000, seed=42)
        blinks = [e for e in events if e.kind is ReflexKind.BLINK]
        # Blink gaps in [2s, 8s] bound the count over 10s to 1..5.
        assert 1 <= len(blinks) <= 5
        previous = 0
        for event in blinks:
            gap = event.at_ms - previous
            assert 2_000 <= gap <= 8_000
            previous = event.at_ms

    def test_breath_gaps(self):
        events = schedule_reflexes(60_000, seed=3)
        breaths = [e.at_ms for e in events if e.kind is ReflexKind.BREATH]
        gaps = [b - a for a, b in zip([0] + breaths, breaths)]
        assert all(3_000 <= g <= 6_000 for g in gaps)

    def test_same_seed_same_list(self):
        assert schedule_reflexes(30_000, seed=5) == schedule_reflexes(30_000, seed=5)

    def test_zero_span_rejected(self):
        with pytest.raises(ContractError):
            schedule_reflexes(0)

    def test_sorted_by_time(self):
        events = schedule_reflexes(45_000, seed=9)
        assert [e.at_ms for e in events] == sorted(e.at_ms for e in events)
