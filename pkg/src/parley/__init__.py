"""parley: headless orchestration engine for an embodied conversational agent.

The engine runs the full interaction loop of a camera-and-microphone
digital teammate: speech-to-text, visual capture, prompt construction over
a budgeted conversation history, chat completion with object/emotion
metadata, speech synthesis, and lip-sync/animation cue generation, with
per-stage latency instrumentation and a scripted scenario evaluation
harness. Backends are pluggable; deterministic mocks ship in the box.
"""

__version__ = "0.1.0"
