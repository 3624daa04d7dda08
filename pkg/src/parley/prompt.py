"""Deterministic prompt construction.

Fuses the pinned system prompt, the budget-trimmed history suffix, and the
new user utterance (with camera frames attached) into the ordered message
sequence handed to the chat backend.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import BudgetError, ContractError
from .model import (
    IMAGE_WEIGHT,
    ConversationHistory,
    Role,
    VisualObservation,
    text_weight,
)

# History roles map onto the three chat roles; observation turns read as
# machine-generated user context.
_CHAT_ROLE = {
    Role.USER: Role.USER,
    Role.ASSISTANT: Role.ASSISTANT,
    Role.VISUAL_OBSERVATION: Role.USER,
}


@dataclass(frozen=True)
class PromptMessage:
    role: Role
    text: str
    attachments: tuple[VisualObservation, ...] = ()

    @property
    def weight(self) -> int:
        return text_weight(self.text) + IMAGE_WEIGHT * len(self.attachments)


@dataclass(frozen=True)
class ConstructedPrompt:
    """Ordered message sequence plus its total budget weight."""

    messages: tuple[PromptMessage, ...]
    total_weight: int

    def without_attachments(self) -> "ConstructedPrompt":
        """Same messages with images stripped; ordering and text unchanged."""
        stripped = tuple(
            PromptMessage(m.role, m.text) for m in self.messages
        )
        return ConstructedPrompt(stripped, sum(m.weight for m in stripped))

    @property
    def user_text(self) -> str:
        return self.messages[-1].text


def construct(
    history: ConversationHistory,
    user_text: str,
    observations: tuple[VisualObservation, ...] | list[VisualObservation] = (),
) -> ConstructedPrompt:
    """Build the message sequence for one turn.

    The system prompt and the new user message are never evicted; history
    turns are kept as the maximal chronological suffix that fits the budget.
    Raises BudgetError when the pinned parts alone exceed the budget.
    """
    if not user_text:
        raise ContractError("user_text must be non-empty")
    observations = tuple(observations)

    system = PromptMessage(Role.SYSTEM, history.system_prompt)
    user = PromptMessage(Role.USER, user_text, attachments=observations)
    base = system.weight + user.weight
    if base > history.budget:
        raise BudgetError(
            f"system prompt and user message weigh {base}, over budget {history.budget}"
        )

    # Walk back from the newest turn, keeping whatever still fits.
    retained: list[PromptMessage] = []
    remaining = history.budget - base
    for turn in reversed(history.turns):
        if turn.weight > remaining:
            break
        retained.append(PromptMessage(_CHAT_ROLE[turn.role], turn.text))
        remaining -= turn.weight

    retained.reverse()
    messages = (system, *retained, user)
    total = sum(m.weight for m in messages)
    return ConstructedPrompt(messages=messages, total_weight=total)
