/**
 * Thin client for the session API.  The server is the source of truth for
 * accuracy and session state; the UI never computes learning logic.
 */

export interface SessionConfig {
  reuse?: string;
  adapt?: string;
  k?: number;
  steps?: number;
  optimizer?: string;
  lr?: number;
  l2?: number;
  selection?: string;
  seed?: number;
}

export interface CreateResponse {
  id: string;
  config: Record<string, unknown>;
}

export interface PredictResponse {
  predicted: string[];
  selected_model: number;
  t: number;
}

export interface FeedbackResponse {
  correct: boolean;
  online_accuracy: number;
  t: number;
}

export interface TracePoint {
  t: number;
  correct: boolean;
  accuracy: number;
}

export interface SessionState {
  t: number;
  online_accuracy: number;
  trace: TracePoint[];
  config: Record<string, unknown>;
  losses: number[] | null;
  buffer_size: number;
  pending: boolean;
}

export class ApiError extends Error {
  constructor(public status: number, detail: string) {
    super(`HTTP ${status}: ${detail}`);
  }
}

async function parse<T>(response: Response): Promise<T> {
  if (!response.ok) {
    let detail = response.statusText;
    try {
      const body = await response.json();
      detail = typeof body.detail === "string" ? body.detail : JSON.stringify(body);
    } catch {
      // keep statusText
    }
    throw new ApiError(response.status, detail);
  }
  return response.json() as Promise<T>;
}

export class SessionClient {
  constructor(public baseUrl: string) {}

  private url(path: string): string {
    return `${this.baseUrl.replace(/\/$/, "")}${path}`;
  }

  async createSession(config: SessionConfig = {}): Promise<CreateResponse> {
    const response = await fetch(this.url("/sessions"), {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(config),
    });
    return parse<CreateResponse>(response);
  }

  async predict(id: string, utt: string[], start: string[]): Promise<PredictResponse> {
    const response = await fetch(this.url(`/sessions/${id}/predict`), {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ utt, start }),
    });
    return parse<PredictResponse>(response);
  }

  async feedback(id: string, target: string[]): Promise<FeedbackResponse> {
    const response = await fetch(this.url(`/sessions/${id}/feedback`), {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ target }),
    });
    return parse<FeedbackResponse>(response);
  }

  async state(id: string): Promise<SessionState> {
    const response = await fetch(this.url(`/sessions/${id}`));
    return parse<SessionState>(response);
  }

  async remove(id: string): Promise<void> {
    await parse(await fetch(this.url(`/sessions/${id}`), { method: "DELETE" }));
  }
}
