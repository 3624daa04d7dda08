"""Prompt construction: ordering, budget, and the maximal-suffix rule."""

import math
import random

import pytest

from parley.errors import BudgetError, ContractError
from parley.model import (
    IMAGE_WEIGHT,
    CameraRole,
    ConversationHistory,
    Role,
    Turn,
    VisualObservation,
)
from parley.prompt import construct


def turn(index, role, text):
    return Turn(turn_index=index, role=role, text=text, created_at=index)


def observation(n=0):
    return VisualObservation(
        camera_role=CameraRole.TASK_VIEW, image_ref=f"fixture:{n}", captured_at=0,
        capture_latency_ms=10,
    )


def brute_force_suffix(history, base_weight):
    """Independent oracle: best chronological suffix that fits the budget."""
    turns = history.turns
    best = []
    for start in range(len(turns) + 1):
        suffix = turns[start:]
        weight = sum(math.ceil(len(t.text) / 4) for t in suffix)
        if base_weight + weight <= history.budget:
            best = suffix
            break
    return best


def test_empty_history_identity():
    history = ConversationHistory("sys", budget=100)
    prompt = construct(history, "hi")
    assert [m.role for m in prompt.messages] == [Role.SYSTEM, Role.USER]
    assert prompt.messages[0].text == "sys"
    assert prompt.messages[-1].text == "hi"
    assert prompt.total_weight == math.ceil(3 / 4) + math.ceil(2 / 4)


def test_one_turn_evicted():
    # system "ssss" (1) + user "uu" (1) + three turns of weight 2 each: budget
    # 6 retains only the two newest turns.
    history = ConversationHistory("ssss", budget=6)
    for i, text in enumerate(["t1aaaaaa", "t2aaaaaa", "t3aaaaaa"]):
        history.append(turn(i, Role.USER if i % 2 == 0 else Role.ASSISTANT, text))
    prompt = construct(history, "uu")
    assert [m.text for m in prompt.messages] == ["ssss", "t2aaaaaa", "t3aaaaaa", "uu"]
    expected = brute_force_suffix(history, base_weight=1 + 1)
    assert [m.text for m in prompt.messages[1:-1]] == [t.text for t in expected]
    assert prompt.total_weight <= history.budget


def test_attachments_charged_per_image():
    history = ConversationHistory("sys", budget=3000)
    observations = (observation(1), observation(2))
    prompt = construct(history, "look", observations)
    assert prompt.messages[-1].attachments == observations
    assert prompt.total_weight == math.ceil(3 / 4) + math.ceil(4 / 4) + 2 * IMAGE_WEIGHT


def test_budget_error_when_pinned_parts_do_not_fit():
    history = ConversationHistory("s" * 400, budget=10)
    with pytest.raises(BudgetError):
        construct(history, "hello")


def test_empty_user_text_rejected():
    history = ConversationHistory("sys", budget=100)
    with pytest.raises(ContractError):
        construct(history, "")


def test_determinism():
    history = ConversationHistory("sys", budget=1100)
    for i in range(6):
        history.append(turn(i, Role.USER if i % 2 == 0 else Role.ASSISTANT, f"line {i}"))
    first = construct(history, "again", (observation(),))
    second = construct(history, "again", (observation(),))
    assert first == second


def test_attachment_stripping_preserves_order_and_text():
    history = ConversationHistory("sys", budget=5000)
    history.append(turn(0, Role.USER, "one"))
    history.append(turn(1, Role.ASSISTANT, "two"))
    prompt = construct(history, "three", (observation(),))
    stripped = prompt.without_attachments()
    assert [m.text for m in stripped.messages] == [m.text for m in prompt.messages]
    assert [m.role for m in stripped.messages] == [m.role for m in prompt.messages]
    assert all(not m.attachments for m in stripped.messages)


def test_maximal_suffix_randomized():
    rng = random.Random(99)
    for _ in range(300):
        budget = rng.randint(5, 120)
        system = "s" * rng.randint(1, 12)
        history = ConversationHistory(system, budget=max(budget, 200))
        for i in range(rng.randint(0, 12)):
            history.append(
                turn(i, Role.USER if i % 2 == 0 else Role.ASSISTANT, "x" * rng.randint(1, 40))
            )
        history.budget = budget  # tighten after the fact to vary retained sets
        user_text = "u" * rng.randint(1, 16)
        images = tuple(observation(i) for i in range(rng.randint(0, 2)))
        base = math.ceil(len(system) / 4) + math.ceil(len(user_text) / 4) + IMAGE_WEIGHT * len(images)
        if base > budget:
            with pytest.raises(BudgetError):
                construct(history, user_text, images)
            continue
        prompt = construct(history, user_text, images)
        assert prompt.messages[0].role is Role.SYSTEM
        assert prompt.messages[-1].role is Role.USER
        assert prompt.messages[-1].text == user_text
        assert prompt.total_weight <= budget
        expected = brute_force_suffix(history, base)
        assert [m.text for m in prompt.messages[1:-1]] == [t.text for t in expected]
