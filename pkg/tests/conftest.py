import pytest

from parley.adapters.base import BackendSet
from parley.adapters.mock import MockChat, MockScript, MockStt, MockTts, MockVision, ScriptEntry
from parley.model import ConversationHistory, SessionConfig
from parley.pipeline import PipelineDriver


def make_script(*exchanges, mode="sequential"):
    """Build a MockScript from (reply, kwargs) or plain reply strings."""
    entries = []
    for item in exchanges:
        if isinstance(item, str):
            entries.append(ScriptEntry(reply_text=item))
        elif isinstance(item, ScriptEntry):
            entries.append(item)
        else:
            entries.append(ScriptEntry(**item))
    return MockScript(entries=entries, mode=mode)


def make_driver(
    *replies,
    config=None,
    transcripts=None,
    emit=None,
    persist=None,
    recorder=None,
    llm=None,
    stt_latency=1300.0,
    vision_latency=2130.0,
    tts_latency=930.0,
):
    config = config or SessionConfig()
    backends = BackendSet(
        stt=MockStt(transcripts=dict(transcripts or {}), latency_ms=stt_latency, default_text=""),
        vision=MockVision(latency_ms=vision_latency),
        llm=llm or MockChat(make_script(*replies)),
        tts=MockTts(latency_ms=tts_latency),
    )
    history = ConversationHistory(config.system_prompt, config.history_budget)
    return PipelineDriver(config=config, backends=backends, history=history,
                          emit=emit, persist=persist, recorder=recorder)


@pytest.fixture
def driver_factory():
    return make_driver
