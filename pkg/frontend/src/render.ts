// DOM projection of the UiView. No state lives in the DOM; render() is
// called after every reducer step and rewrites the dynamic regions.

import type { UiView } from "./state.js";
import type { StageSummary } from "./types.js";

const STAGE_ORDER = ["stt", "vision", "llm", "tts", "residual"] as const;

const STAGE_COLORS: Record<string, string> = {
  stt: "#4e79a7",
  vision: "#f28e2b",
  llm: "#e15759",
  tts: "#76b7b2",
  residual: "#bab0ac",
};

export function skeleton(): string {
  return `
  <div class="console">
    <header>
      <h1>operator console</h1>
      <div class="badges">
        <span id="state-badge" class="badge" data-testid="state-badge">idle</span>
        <span id="emotion-badge" class="badge" data-testid="emotion-badge">no emotion</span>
        <span id="cue-badge" class="badge" data-testid="cue-badge">no cue</span>
      </div>
      <div id="banner" class="banner hidden" data-testid="banner"></div>
    </header>
    <section class="controls">
      <button id="new-session" data-testid="new-session">new session</button>
      <span id="session-label" data-testid="session-label">no session</span>
      <button id="reset-session" data-testid="reset-session" disabled>reset</button>
    </section>
    <section class="transcript" id="transcript" data-testid="transcript"></section>
    <section class="composer">
      <input id="composer-input" data-testid="composer-input"
             placeholder="say something" disabled />
      <button id="send" data-testid="send" disabled>send</button>
      <span id="notice" class="notice" data-testid="notice"></span>
    </section>
    <section class="latency">
      <h2>last turn latency</h2>
      <div id="latency-bars" data-testid="latency-bars"></div>
    </section>
    <section class="viseme">
      <h2>lip sync</h2>
      <div id="viseme-strip" data-testid="viseme-strip"></div>
    </section>
    <section class="scenario">
      <h2>scenario stepper</h2>
      <select id="scenario-select" data-testid="scenario-select"></select>
      <button id="scenario-step" data-testid="scenario-step" disabled>step</button>
      <span id="scenario-progress" data-testid="scenario-progress"></span>
    </section>
    <section class="stats">
      <h2>running stats</h2>
      <table id="stats-table" data-testid="stats-table"></table>
    </section>
  </div>`;
}

function byId<T extends HTMLElement>(root: ParentNode, id: string): T {
  const element = root.querySelector(`#${id}`);
  if (!element) throw new Error(`missing element #${id}`);
  return element as T;
}

export function render(root: ParentNode, view: UiView): void {
  const stateBadge = byId<HTMLSpanElement>(root, "state-badge");
  stateBadge.textContent = view.faultStage
    ? `faulted (${view.faultStage})`
    : view.state;
  stateBadge.dataset.state = view.state;

  byId<HTMLSpanElement>(root, "emotion-badge").textContent = view.emotion ?? "no emotion";
  byId<HTMLSpanElement>(root, "cue-badge").textContent = view.cue ?? "no cue";

  const transcript = byId<HTMLElement>(root, "transcript");
  transcript.innerHTML = view.transcript
    .map(
      (entry) =>
        `<div class="turn ${entry.role}" data-turn-index="${entry.turnIndex}">` +
        `<span class="who">${entry.role}</span>` +
        `<span class="text">${escapeHtml(entry.text)}</span></div>`,
    )
    .join("");

  const bars = byId<HTMLElement>(root, "latency-bars");
  if (view.lastLatencies) {
    const total = view.lastLatencies.total_ms || 1;
    bars.innerHTML = STAGE_ORDER.map((stage) => {
      const ms = view.lastLatencies![`${stage}_ms` as const];
      const pct = Math.max(0, (ms / total) * 100);
      return (
        `<div class="bar-row" data-stage="${stage}" data-ms="${ms}">` +
        `<span class="bar-label">${stage}</span>` +
        `<span class="bar" style="width:${pct.toFixed(2)}%;background:${STAGE_COLORS[stage]}"></span>` +
        `<span class="bar-ms">${ms.toFixed(0)} ms</span></div>`
      );
    }).join("") +
      `<div class="bar-total" data-testid="latency-total" data-total="${view.lastLatencies.total_ms}">` +
      `total ${view.lastLatencies.total_ms.toFixed(0)} ms</div>`;
  } else {
    bars.innerHTML = `<div class="empty">no turns yet</div>`;
  }

  const strip = byId<HTMLElement>(root, "viseme-strip");
  if (view.visemeTrack && view.visemeDurationMs > 0) {
    strip.innerHTML = view.visemeTrack
      .map(([viseme, start, end]) => {
        const pct = ((end - start) / view.visemeDurationMs) * 100;
        const cls = viseme === "rest" ? "viseme rest" : "viseme";
        return `<span class="${cls}" data-viseme="${viseme}" style="width:${pct.toFixed(2)}%" title="${viseme}"></span>`;
      })
      .join("");
  } else {
    strip.innerHTML = `<div class="empty">no speech yet</div>`;
  }

  const notice = byId<HTMLElement>(root, "notice");
  if (view.aborted) {
    notice.textContent = `turn aborted in ${view.aborted}; reset to continue`;
  }
}

export function renderStats(root: ParentNode, stages: Record<string, StageSummary>): void {
  const table = byId<HTMLTableElement>(root, "stats-table");
  const names = Object.keys(stages);
  if (!names.length) {
    table.innerHTML = "";
    return;
  }
  const header =
    "<tr><th>stage</th><th>n</th><th>mean</th><th>std</th><th>p99</th></tr>";
  const rows = names
    .map((name) => {
      const s = stages[name];
      return (
        `<tr data-stage="${name}"><td>${name}</td><td>${s.n}</td>` +
        `<td>${s.mean_ms.toFixed(0)}</td><td>${s.std_ms.toFixed(0)}</td>` +
        `<td>${s.p99_ms.toFixed(0)}</td></tr>`
      );
    })
    .join("");
  table.innerHTML = header + rows;
}

export function setBanner(root: ParentNode, message: string | null): void {
  const banner = byId<HTMLElement>(root, "banner");
  if (message) {
    banner.textContent = message;
    banner.classList.remove("hidden");
  } else {
    banner.textContent = "";
    banner.classList.add("hidden");
  }
}

function escapeHtml(text: string): string {
  return text
    .replaceAll("&", "&amp;")
    .replaceAll("<", "&lt;")
    .replaceAll(">", "&gt;")
    .replaceAll('"', "&quot;");
}
