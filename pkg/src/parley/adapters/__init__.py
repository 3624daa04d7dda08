"""Backend contracts, deterministic mocks, and the HTTP chat wire client."""

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
)
from .mock import EchoChat, MockChat, MockScript, MockStt, MockTts, MockVision, ScriptEntry
from .wire import HttpChatBackend, WireConfig, decode_messages, encode_messages

__all__ = [
    "ChatBackend",
    "EchoChat",
    "HttpChatBackend",
    "MockChat",
    "MockScript",
    "MockStt",
    "MockTts",
    "MockVision",
    "ResponseEnvelope",
    "ScriptEntry",
    "SpeechSynthesis",
    "SpeechToText",
    "SttResult",
    "TtsResult",
    "VisionCapture",
    "WireConfig",
    "decode_messages",
    "encode_messages",
    "format_meta_trailer",
    "parse_meta_trailer",
]
