// Event feed consumer. Prefers the server-sent-event stream parsed off a
// fetch body (works in browsers and modern node alike, no EventSource
// needed); falls back to polling the JSON /events endpoint when streaming
// is unavailable. Both transports deliver the same total order, and
// reconnects resume from the last seen sequence number.

import type { EventRecord } from "./types.js";

export interface FeedHandlers {
  onRecord: (record: EventRecord) => void;
  onStatus?: (connected: boolean) => void;
}

export interface FeedHandle {
  stop(): void;
}

const RETRY_MS = 1000;
const POLL_MS = 150;

export function openFeed(
  baseUrl: string,
  sessionId: string,
  handlers: FeedHandlers,
  mode: "auto" | "sse" | "poll" = "auto",
  after = -1,
): FeedHandle {
  let stopped = false;
  let lastSeq = after;

  const deliver = (record: EventRecord) => {
    if (record.seq > lastSeq) {
      lastSeq = record.seq;
      handlers.onRecord(record);
    }
  };

  const poll = async () => {
    while (!stopped) {
      try {
        const response = await fetch(
          `${baseUrl}/sessions/${sessionId}/events?after=${lastSeq}`,
        );
        if (!response.ok) throw new Error(`events ${response.status}`);
        const body = (await response.json()) as { events: EventRecord[] };
        handlers.onStatus?.(true);
        for (const record of body.events) deliver(record);
      } catch {
        handlers.onStatus?.(false);
        await sleep(RETRY_MS);
        continue;
      }
      await sleep(POLL_MS);
    }
  };

  const streamOnce = async (): Promise<void> => {
    const response = await fetch(
      `${baseUrl}/sessions/${sessionId}/stream?after=${lastSeq}`,
    );
    if (!response.ok || !response.body) {
      throw new Error(`stream ${response.status}`);
    }
    handlers.onStatus?.(true);
    const reader = response.body.getReader();
    const decoder = new TextDecoder();
    let buffer = "";
    for (;;) {
      const { value, done } = await reader.read();
      if (stopped) {
        await reader.cancel().catch(() => undefined);
        return;
      }
      if (done) return;
      buffer += decoder.decode(value, { stream: true });
      let frameEnd = buffer.indexOf("\n\n");
      while (frameEnd >= 0) {
        const frame = buffer.slice(0, frameEnd);
        buffer = buffer.slice(frameEnd + 2);
        for (const line of frame.split("\n")) {
          if (line.startsWith("data: ")) {
            deliver(JSON.parse(line.slice(6)) as EventRecord);
          }
        }
        frameEnd = buffer.indexOf("\n\n");
      }
    }
  };

  const stream = async () => {
    while (!stopped) {
      try {
        await streamOnce();
      } catch {
        if (mode === "auto") {
          // Streaming not available here; degrade to polling.
          void poll();
          return;
        }
      }
      if (!stopped) {
        handlers.onStatus?.(false);
        await sleep(RETRY_MS);
      }
    }
  };

  if (mode === "poll") {
    void poll();
  } else {
    void stream();
  }

  return {
    stop() {
      stopped = true;
    },
  };
}

function sleep(ms: number): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, ms));
}
