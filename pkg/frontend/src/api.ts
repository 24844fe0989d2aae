/** Thin fetch client for the annotation service. */

import type {
  LabelPayload,
  LabelResponse,
  NewTranscript,
  SessionInfo,
  TimelinePayload,
} from "./types.js";

export class ApiError extends Error {
  status: number;
  errors: string[];

  constructor(status: number, errors: string[]) {
    super(errors.join("; ") || `request failed with ${status}`);
    this.status = status;
    this.errors = errors;
  }
}

function extractErrors(body: unknown): string[] {
  if (body && typeof body === "object" && "detail" in body) {
    const detail = (body as { detail: unknown }).detail;
    if (typeof detail === "string") return [detail];
    if (detail && typeof detail === "object" && "errors" in detail) {
      const errors = (detail as { errors: unknown }).errors;
      if (Array.isArray(errors)) return errors.map(String);
    }
    return [JSON.stringify(detail)];
  }
  return [];
}

export class ApiClient {
  constructor(private base: string = "") {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await fetch(this.base + path, {
      headers: { "content-type": "application/json" },
      ...init,
    });
    if (!response.ok) {
      let body: unknown = null;
      try {
        body = await response.json();
      } catch {
        // non-JSON error body; status alone will have to do
      }
      throw new ApiError(response.status, extractErrors(body));
    }
    return (await response.json()) as T;
  }

  createSession(transcript: NewTranscript): Promise<{ session_id: string }> {
    return this.request("/sessions", {
      method: "POST",
      body: JSON.stringify(transcript),
    });
  }

  sessionInfo(sessionId: string): Promise<SessionInfo> {
    return this.request(`/sessions/${sessionId}`);
  }

  postLabels(
    sessionId: string,
    uttId: number,
    labels: LabelPayload[],
  ): Promise<LabelResponse> {
    return this.request(`/sessions/${sessionId}/labels`, {
      method: "POST",
      body: JSON.stringify({ utt_id: uttId, labels }),
    });
  }

  reviseLabels(
    sessionId: string,
    uttId: number,
    labels: LabelPayload[],
  ): Promise<LabelResponse> {
    return this.request(`/sessions/${sessionId}/labels/${uttId}`, {
      method: "PUT",
      body: JSON.stringify({ labels }),
    });
  }

  timeline(sessionId: string): Promise<TimelinePayload> {
    return this.request(`/sessions/${sessionId}/timeline`);
  }

  /** Raw export body; the UI must add nothing to the data path. */
  async exportFile(sessionId: string, format: "jsonl" | "tsv"): Promise<string> {
    const response = await fetch(
      `${this.base}/sessions/${sessionId}/export?format=${format}`,
    );
    if (!response.ok) {
      throw new ApiError(response.status, [`export failed with ${response.status}`]);
    }
    return await response.text();
  }
}
