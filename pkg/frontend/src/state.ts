// The UI view is a pure fold over the session's event records: replaying
// the same feed always reproduces the identical view. Nothing in here
// invents state; every field traces back to a server record.

import type { EventRecord, StageLatencies, TranscriptEntry, VisemeSegment } from "./types.js";

export interface UiView {
  state: string;
  faultStage: string | null;
  stateHistory: string[];
  transcript: TranscriptEntry[];
  emotion: string | null;
  cue: string | null;
  pendingLatencies: Partial<Record<"stt" | "vision" | "llm" | "tts", number>>;
  lastLatencies: StageLatencies | null;
  visemeTrack: VisemeSegment[] | null;
  visemeDurationMs: number;
  lastSeq: number;
  aborted: string | null;
}

export function initialView(): UiView {
  return {
    state: "idle",
    faultStage: null,
    stateHistory: [],
    transcript: [],
    emotion: null,
    cue: null,
    pendingLatencies: {},
    lastLatencies: null,
    visemeTrack: null,
    visemeDurationMs: 0,
    lastSeq: -1,
    aborted: null,
  };
}

export function reduce(view: UiView, record: EventRecord): UiView {
  const next: UiView = {
    ...view,
    stateHistory: view.stateHistory,
    transcript: view.transcript,
    pendingLatencies: view.pendingLatencies,
    lastSeq: record.seq,
  };

  switch (record.kind) {
    case "state": {
      const state = record.state as string;
      next.state = state;
      next.faultStage = state === "faulted" ? ((record.fault_stage as string) ?? null) : null;
      next.stateHistory = [...view.stateHistory, state];
      break;
    }
    case "cue": {
      next.cue = record.cue as string;
      const emotion = record.emotion as { label?: string; detail?: string } | undefined;
      if (record.cue === "emotion_overlay" && emotion) {
        next.emotion = emotion.detail || emotion.label || null;
      }
      break;
    }
    case "latency": {
      const stage = record.stage as "stt" | "vision" | "llm" | "tts";
      next.pendingLatencies = { ...view.pendingLatencies, [stage]: record.ms as number };
      break;
    }
    case "viseme_track": {
      next.visemeTrack = record.segments as VisemeSegment[];
      next.visemeDurationMs = record.total_duration_ms as number;
      break;
    }
    case "turn_committed": {
      const pending = view.pendingLatencies;
      const total = record.total_ms as number;
      const stt = pending.stt ?? 0;
      const vision = pending.vision ?? 0;
      const llm = pending.llm ?? 0;
      const tts = pending.tts ?? 0;
      next.lastLatencies = {
        stt_ms: stt,
        vision_ms: vision,
        llm_ms: llm,
        tts_ms: tts,
        // The feed reports the four backend stages; the remainder of the
        // server-reported total is the playback/orchestration residual.
        residual_ms: total - (stt + vision + llm + tts),
        total_ms: total,
      };
      next.pendingLatencies = {};
      next.transcript = [
        ...view.transcript,
        {
          turnIndex: record.user_turn_index as number,
          role: "user",
          text: record.user_text as string,
        },
        {
          turnIndex: record.assistant_turn_index as number,
          role: "assistant",
          text: record.assistant_text as string,
        },
      ];
      const emotion = record.emotion as { label?: string; detail?: string } | null;
      if (emotion) {
        next.emotion = emotion.detail || emotion.label || null;
      }
      next.aborted = null;
      break;
    }
    case "turn_aborted": {
      next.aborted = record.stage as string;
      next.pendingLatencies = {};
      break;
    }
    default:
      break;
  }
  return next;
}

export function replay(records: EventRecord[]): UiView {
  return records.reduce(reduce, initialView());
}
