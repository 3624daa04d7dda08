// Reducer unit tests: the view is a pure projection of the event feed.

import { describe, expect, it } from "vitest";

import { initialView, reduce, replay } from "../src/state.js";
import type { EventRecord } from "../src/types.js";

let seq = 0;
function record(kind: string, fields: Record<string, unknown> = {}): EventRecord {
  return { seq: seq++, at: 1000 + seq, kind, ...fields };
}

function fullTurnFeed(): EventRecord[] {
  seq = 0;
  return [
    record("state", { state: "listening" }),
    record("action", { action: "capture_frames" }),
    record("state", { state: "transcribing" }),
    record("state", { state: "thinking" }),
    record("cue", { cue: "thinking" }),
    record("latency", { stage: "stt", ms: 0 }),
    record("latency", { stage: "vision", ms: 2130 }),
    record("latency", { stage: "llm", ms: 400 }),
    record("state", { state: "speaking" }),
    record("cue", { cue: "speaking" }),
    record("latency", { stage: "tts", ms: 930 }),
    record("viseme_track", {
      segments: [["MBP", 0, 150], ["AI", 150, 380], ["rest", 380, 400]],
      total_duration_ms: 400,
    }),
    record("state", { state: "idle" }),
    record("cue", { cue: "idle" }),
    record("turn_committed", {
      user_turn_index: 0,
      assistant_turn_index: 1,
      user_text: "check the parts",
      assistant_text: "all parts are present",
      emotion: { label: "neutral", confidence: 1 },
      total_ms: 3860,
    }),
  ];
}

describe("reduce", () => {
  it("tracks the state badge through a full turn", () => {
    const view = replay(fullTurnFeed());
    expect(view.stateHistory).toEqual([
      "listening", "transcribing", "thinking", "speaking", "idle",
    ]);
    expect(view.state).toBe("idle");
  });

  it("appends exactly two transcript entries per committed turn", () => {
    const view = replay(fullTurnFeed());
    expect(view.transcript).toHaveLength(2);
    expect(view.transcript[0]).toEqual({
      turnIndex: 0, role: "user", text: "check the parts",
    });
    expect(view.transcript[1].role).toBe("assistant");
  });

  it("derives latency bars that sum to the reported total", () => {
    const view = replay(fullTurnFeed());
    const bars = view.lastLatencies!;
    const sum =
      bars.stt_ms + bars.vision_ms + bars.llm_ms + bars.tts_ms + bars.residual_ms;
    expect(sum).toBeCloseTo(bars.total_ms, 6);
    expect(bars.total_ms).toBe(3860);
    expect(bars.residual_ms).toBe(3860 - (0 + 2130 + 400 + 930));
  });

  it("is a pure projection: replaying the feed reproduces the view", () => {
    const feed = fullTurnFeed();
    expect(replay(feed)).toEqual(replay(feed));
  });

  it("does not mutate the previous view", () => {
    const feed = fullTurnFeed();
    const before = initialView();
    const snapshot = JSON.parse(JSON.stringify(before));
    reduce(before, feed[0]);
    expect(before).toEqual(snapshot);
  });

  it("surfaces emotion overlays from cue records", () => {
    seq = 0;
    const view = replay([
      record("cue", {
        cue: "emotion_overlay",
        emotion: { label: "frustrated", confidence: 0.9 },
      }),
    ]);
    expect(view.emotion).toBe("frustrated");
  });

  it("keeps fault details and clears them on recovery", () => {
    seq = 0;
    let view = replay([
      record("state", { state: "faulted", fault_stage: "llm", fault_reason: "timeout" }),
    ]);
    expect(view.state).toBe("faulted");
    expect(view.faultStage).toBe("llm");
    view = reduce(view, record("state", { state: "idle" }));
    expect(view.faultStage).toBeNull();
  });

  it("records viseme tracks for the strip chart", () => {
    const view = replay(fullTurnFeed());
    expect(view.visemeTrack).toHaveLength(3);
    expect(view.visemeDurationMs).toBe(400);
  });
});
