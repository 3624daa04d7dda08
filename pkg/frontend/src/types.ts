// Shapes mirrored from the service's documented wire formats
// (see ../docs/protocol.md).

export interface EventRecord {
  seq: number;
  at: number;
  kind: string;
  [key: string]: unknown;
}

export interface StageLatencies {
  stt_ms: number;
  vision_ms: number;
  llm_ms: number;
  tts_ms: number;
  residual_ms: number;
  total_ms: number;
}

export interface TranscriptEntry {
  turnIndex: number;
  role: "user" | "assistant";
  text: string;
}

export type VisemeSegment = [viseme: string, startMs: number, endMs: number];

export interface StageSummary {
  n: number;
  mean_ms: number;
  std_ms: number;
  p99_ms: number;
  min_ms: number;
  max_ms: number;
}

export interface ScenarioInfo {
  id: string;
  phase: string;
  initial_user_text: string;
  feedback_paragraphs: string[];
}

export interface SessionView {
  session_id: string;
  state: string;
  turn_count: number;
  next_turn_index: number;
  created_at: number;
}

export interface TurnResult {
  committed: boolean;
  user_turn_index?: number;
  assistant_turn_index?: number;
  user_text?: string;
  assistant_text?: string;
  emotion?: { label: string; confidence: number; detail?: string } | null;
  stage_latencies?: StageLatencies;
}
