/** Thin typed client for the /v1 review API; the only I/O path in the app. */

import type {
  DecisionRequest,
  DecisionResponse,
  ErrorPayload,
  ExportDoc,
  RowCandidates,
  SessionInfo,
  SessionSummary,
  SuggestionPair,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly payload: ErrorPayload,
  ) {
    super(payload.message);
    this.name = "ApiError";
  }

  get isConflict(): boolean {
    return this.status === 409;
  }
}

async function parseError(response: Response): Promise<never> {
  let payload: ErrorPayload = {
    type: "HttpError",
    module: "api",
    message: `request failed with status ${response.status}`,
  };
  try {
    const body = (await response.json()) as { error?: ErrorPayload };
    if (body.error) payload = body.error;
  } catch {
    // non-JSON error body; keep the generic payload
  }
  throw new ApiError(response.status, payload);
}

export class ReviewApi {
  constructor(private readonly base: string = "") {}

  private async getJson<T>(path: string): Promise<T> {
    const response = await fetch(this.base + path);
    if (!response.ok) await parseError(response);
    return (await response.json()) as T;
  }

  async listSessions(): Promise<SessionSummary[]> {
    const body = await this.getJson<{ sessions: SessionSummary[] }>("/v1/sessions");
    return body.sessions;
  }

  async getSession(id: string): Promise<SessionInfo> {
    const body = await this.getJson<{ session: SessionInfo }>(`/v1/sessions/${id}`);
    return body.session;
  }

  async getCandidates(id: string): Promise<RowCandidates[]> {
    const body = await this.getJson<{ candidates: RowCandidates[] }>(
      `/v1/sessions/${id}/candidates`,
    );
    return body.candidates;
  }

  async decide(id: string, request: DecisionRequest): Promise<DecisionResponse> {
    const response = await fetch(`${this.base}/v1/sessions/${id}/decisions`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(request),
    });
    if (!response.ok) await parseError(response);
    return (await response.json()) as DecisionResponse;
  }

  async suggestion(id: string): Promise<SuggestionPair[]> {
    const body = await this.getJson<{ suggestion: SuggestionPair[] }>(
      `/v1/sessions/${id}/suggestion`,
    );
    return body.suggestion;
  }

  async exportStructured(id: string): Promise<ExportDoc> {
    return this.getJson<ExportDoc>(`/v1/sessions/${id}/export?format=structured`);
  }

  async exportCsv(id: string): Promise<string> {
    const response = await fetch(`${this.base}/v1/sessions/${id}/export?format=csv`);
    if (!response.ok) await parseError(response);
    return response.text();
  }

  async createSession(form: FormData): Promise<SessionInfo> {
    const response = await fetch(`${this.base}/v1/sessions`, {
      method: "POST",
      body: form,
    });
    if (!response.ok && response.status !== 422) await parseError(response);
    const body = (await response.json()) as {
      session: SessionInfo;
      error?: ErrorPayload;
    };
    return body.session;
  }

  async deleteSession(id: string): Promise<void> {
    const response = await fetch(`${this.base}/v1/sessions/${id}`, { method: "DELETE" });
    if (!response.ok) await parseError(response);
  }
}
