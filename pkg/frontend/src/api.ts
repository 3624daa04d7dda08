// Thin typed client over the service's REST endpoints.

import type { ScenarioInfo, SessionView, StageSummary, TurnResult } from "./types.js";

export class ApiError extends Error {
  constructor(public status: number, message: string) {
    super(message);
  }
}

async function request<T>(url: string, init?: RequestInit): Promise<T> {
  const response = await fetch(url, init);
  if (!response.ok) {
    let detail = response.statusText;
    try {
      const body = (await response.json()) as { detail?: string };
      if (body.detail) detail = body.detail;
    } catch {
      // keep the status text
    }
    throw new ApiError(response.status, detail);
  }
  return (await response.json()) as T;
}

export class ApiClient {
  constructor(private baseUrl: string) {}

  createSession(llmBackend = "echo"): Promise<SessionView> {
    return request<SessionView>(`${this.baseUrl}/sessions`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({
        config: {
          backends: { stt: "mock", vision: "mock", llm: llmBackend, tts: "mock" },
        },
      }),
    });
  }

  sendTurn(sessionId: string, text: string): Promise<TurnResult> {
    return request<TurnResult>(`${this.baseUrl}/sessions/${sessionId}/turns`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ text }),
    });
  }

  resetSession(sessionId: string): Promise<{ state: string }> {
    return request(`${this.baseUrl}/sessions/${sessionId}/reset`, { method: "POST" });
  }

  fetchEvents(sessionId: string, after: number): Promise<{ events: unknown[]; next: number }> {
    return request(`${this.baseUrl}/sessions/${sessionId}/events?after=${after}`);
  }

  fetchMetrics(): Promise<{ stages: Record<string, StageSummary> }> {
    return request(`${this.baseUrl}/metrics`);
  }

  fetchScenarios(): Promise<{ scenarios: ScenarioInfo[] }> {
    return request(`${this.baseUrl}/scenarios`);
  }
}
