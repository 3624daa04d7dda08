// Wires the API client, the event feed, the reducer, and the DOM together.

import { ApiClient, ApiError } from "./api.js";
import { openFeed, type FeedHandle } from "./feed.js";
import { initialView, reduce, type UiView } from "./state.js";
import { render, renderStats, setBanner, skeleton } from "./render.js";
import type { EventRecord, ScenarioInfo } from "./types.js";

export interface AppHandle {
  getView(): UiView;
  getSessionId(): string | null;
  sendMessage(text: string): Promise<void>;
  waitForIdle(timeoutMs?: number): Promise<UiView>;
  stop(): void;
}

export interface AppOptions {
  feedMode?: "auto" | "sse" | "poll";
}

export function initApp(
  root: HTMLElement,
  baseUrl: string,
  options: AppOptions = {},
): AppHandle {
  root.innerHTML = skeleton();
  const api = new ApiClient(baseUrl);

  let view = initialView();
  let sessionId: string | null = null;
  let feed: FeedHandle | null = null;
  let scenarios: ScenarioInfo[] = [];
  let scenarioCursor = -1; // -1: next send is the opening utterance

  const input = root.querySelector<HTMLInputElement>("#composer-input")!;
  const sendButton = root.querySelector<HTMLButtonElement>("#send")!;
  const newSessionButton = root.querySelector<HTMLButtonElement>("#new-session")!;
  const resetButton = root.querySelector<HTMLButtonElement>("#reset-session")!;
  const sessionLabel = root.querySelector<HTMLSpanElement>("#session-label")!;
  const notice = root.querySelector<HTMLSpanElement>("#notice")!;
  const scenarioSelect = root.querySelector<HTMLSelectElement>("#scenario-select")!;
  const scenarioStep = root.querySelector<HTMLButtonElement>("#scenario-step")!;
  const scenarioProgress = root.querySelector<HTMLSpanElement>("#scenario-progress")!;

  render(root, view);

  const refreshControls = () => {
    const ready = sessionId !== null && view.state === "idle";
    input.disabled = !ready;
    sendButton.disabled = !ready;
    scenarioStep.disabled = !ready || scenarios.length === 0;
    resetButton.disabled = sessionId === null || view.state !== "faulted";
  };

  const onRecord = (record: EventRecord) => {
    view = reduce(view, record);
    render(root, view);
    refreshControls();
    if (record.kind === "turn_committed") {
      void api
        .fetchMetrics()
        .then((body) => renderStats(root, body.stages))
        .catch(() => undefined);
    }
  };

  const connectFeed = () => {
    feed?.stop();
    feed = openFeed(
      baseUrl,
      sessionId!,
      {
        onRecord,
        onStatus: (connected) => {
          setBanner(root, connected ? null : "feed disconnected, retrying");
        },
      },
      options.feedMode ?? "auto",
      view.lastSeq,
    );
  };

  const createSession = async () => {
    try {
      const created = await api.createSession();
      sessionId = created.session_id;
      view = initialView();
      sessionLabel.textContent = sessionId;
      setBanner(root, null);
      render(root, view);
      connectFeed();
      refreshControls();
    } catch (error) {
      setBanner(root, `session create failed: ${describe(error)}`);
    }
  };

  const sendMessage = async (text: string) => {
    if (!sessionId || !text) return;
    notice.textContent = "";
    input.disabled = true;
    sendButton.disabled = true;
    try {
      await api.sendTurn(sessionId, text);
    } catch (error) {
      if (error instanceof ApiError && error.status === 409) {
        notice.textContent = "busy: a turn is already in flight";
      } else {
        notice.textContent = describe(error);
      }
    } finally {
      refreshControls();
    }
  };

  newSessionButton.addEventListener("click", () => void createSession());
  resetButton.addEventListener("click", () => {
    if (sessionId) void api.resetSession(sessionId).catch(() => undefined);
  });
  sendButton.addEventListener("click", () => {
    const text = input.value.trim();
    input.value = "";
    void sendMessage(text);
  });
  input.addEventListener("keydown", (event) => {
    if ((event as KeyboardEvent).key === "Enter") {
      const text = input.value.trim();
      input.value = "";
      void sendMessage(text);
    }
  });

  scenarioSelect.addEventListener("change", () => {
    scenarioCursor = -1;
    scenarioProgress.textContent = "";
  });
  scenarioStep.addEventListener("click", () => {
    const scenario = scenarios.find((s) => s.id === scenarioSelect.value);
    if (!scenario) return;
    let text: string;
    if (scenarioCursor < 0) {
      text = scenario.initial_user_text;
    } else {
      const paragraphs = scenario.feedback_paragraphs;
      if (!paragraphs.length) return;
      text = paragraphs[scenarioCursor % paragraphs.length];
    }
    scenarioCursor += 1;
    scenarioProgress.textContent =
      scenarioCursor === 0 ? "sent opening" : `feedback ${scenarioCursor}`;
    void sendMessage(text);
  });

  void api
    .fetchScenarios()
    .then((body) => {
      scenarios = body.scenarios;
      scenarioSelect.innerHTML = scenarios
        .map((s) => `<option value="${s.id}">${s.id} (${s.phase})</option>`)
        .join("");
      refreshControls();
    })
    .catch(() => undefined); // service may run without a scenario catalog

  return {
    getView: () => view,
    getSessionId: () => sessionId,
    sendMessage,
    async waitForIdle(timeoutMs = 10_000) {
      const deadline = Date.now() + timeoutMs;
      while (Date.now() < deadline) {
        if (
          view.state === "idle" &&
          view.stateHistory.length > 0 &&
          view.stateHistory[view.stateHistory.length - 1] === "idle"
        ) {
          return view;
        }
        await new Promise((resolve) => setTimeout(resolve, 25));
      }
      throw new Error(`session did not settle; state=${view.state}`);
    },
    stop() {
      feed?.stop();
    },
  };
}

function describe(error: unknown): string {
  return error instanceof Error ? error.message : String(error);
}
