"""Generic HTTP chat-completions client.

Speaks the vendor-neutral chat envelope documented in docs/protocol.md:
ordered messages with role in {system, user, assistant}; user messages may
carry image attachments as URLs or base64 data URLs. The auth token is read
from an environment variable so it never lands in config files.
"""

from __future__ import annotations

import base64
import os
import time
from dataclasses import dataclass

import httpx

from ..errors import ProtocolError, StageTimeoutError
from ..model import Role, VisualObservation
from ..prompt import ConstructedPrompt, PromptMessage
from .base import ChatBackend, ResponseEnvelope, parse_meta_trailer, require_valid_prompt

COMPLETIONS_PATH = "/v1/chat/completions"


@dataclass(frozen=True)
class WireConfig:
    base_url: str
    model: str = "default"
    auth_env: str = "CHAT_API_KEY"
    timeout_ms: int = 60_000


def _attachment_part(observation: VisualObservation) -> dict:
    ref = observation.image_ref
    if isinstance(ref, bytes):
        encoded = base64.b64encode(ref).decode("ascii")
        url = f"data:image/jpeg;base64,{encoded}"
    else:
        url = ref
    return {"type": "image_url", "image_url": {"url": url}}


def encode_messages(prompt: ConstructedPrompt) -> list[dict]:
    """Prompt messages -> wire message list (the request's ``messages`` field)."""
    wire: list[dict] = []
    for message in prompt.messages:
        if message.attachments:
            content: list[dict] | str = [
                {"type": "text", "text": message.text},
                *(_attachment_part(o) for o in message.attachments),
            ]
        else:
            content = message.text
        wire.append({"role": message.role.value, "content": content})
    return wire


def decode_messages(wire: list[dict]) -> list[tuple[str, str, tuple[str, ...]]]:
    """Wire message list -> (role, text, attachment urls) triples."""
    decoded: list[tuple[str, str, tuple[str, ...]]] = []
    for message in wire:
        role = message["role"]
        content = message["content"]
        if isinstance(content, str):
            decoded.append((role, content, ()))
            continue
        text = ""
        urls: list[str] = []
        for part in content:
            if part.get("type") == "text":
                text = part["text"]
            elif part.get("type") == "image_url":
                urls.append(part["image_url"]["url"])
            else:
                raise ProtocolError(f"unknown content part type {part.get('type')!r}")
        decoded.append((role, text, tuple(urls)))
    return decoded


class HttpChatBackend(ChatBackend):
    def __init__(self, config: WireConfig, client: httpx.Client | None = None):
        self.config = config
        timeout = httpx.Timeout(config.timeout_ms / 1000.0)
        self._client = client or httpx.Client(base_url=config.base_url, timeout=timeout)

    def _headers(self) -> dict:
        headers = {"content-type": "application/json"}
        token = os.environ.get(self.config.auth_env, "")
        if token:
            headers["authorization"] = f"Bearer {token}"
        return headers

    def complete(self, prompt: ConstructedPrompt) -> ResponseEnvelope:
        require_valid_prompt(prompt)
        payload = {"model": self.config.model, "messages": encode_messages(prompt)}
        started = time.monotonic()
        try:
            response = self._client.post(
                COMPLETIONS_PATH, json=payload, headers=self._headers()
            )
        except httpx.TimeoutException as exc:
            raise StageTimeoutError("llm", str(exc)) from exc
        except httpx.HTTPError as exc:
            raise ProtocolError(f"chat backend request failed: {exc}") from exc
        latency_ms = (time.monotonic() - started) * 1000.0

        if response.status_code != 200:
            raise ProtocolError(
                f"chat backend returned {response.status_code}: {response.text[:200]}"
            )
        try:
            body = response.json()
            content = body["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise ProtocolError(f"malformed chat payload: {exc}") from exc
        if isinstance(content, list):
            content = "".join(
                part.get("text", "") for part in content if isinstance(part, dict)
            )
        if not isinstance(content, str) or not content.strip():
            raise ProtocolError("chat backend returned an empty reply")

        clean, emotion, objects = parse_meta_trailer(content)
        if not clean:
            raise ProtocolError("chat backend reply was only a metadata trailer")
        return ResponseEnvelope(
            reply_text=clean,
            emotion=emotion,
            objects=objects,
            raw=body,
            latency_ms=latency_ms,
        )


def prompt_from_wire(wire: list[dict]) -> ConstructedPrompt:
    """Rebuild a text-only prompt from wire messages (round-trip helper)."""
    messages = tuple(
        PromptMessage(Role(role), text) for role, text, _ in decode_messages(wire)
    )
    return ConstructedPrompt(messages=messages, total_weight=sum(m.weight for m in messages))
