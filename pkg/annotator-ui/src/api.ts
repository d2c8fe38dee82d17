/** Typed client for the annotation service JSON API. */

export type Verdict = "yes" | "no";

export interface SessionInfo {
  session_id: string;
  total_pairs: number;
}

export interface PairPayload {
  pair_id: string;
  gt_url: string;
  sr_url: string;
}

export type NextPair = PairPayload | { done: true };

export interface AnswerAck {
  accepted: boolean;
  remaining: number;
}

/** Server responded with a non-2xx status. */
export class ApiError extends Error {
  constructor(public readonly status: number, message: string) {
    super(message);
    this.name = "ApiError";
  }
}

export function isDone(next: NextPair): next is { done: true } {
  return "done" in next && next.done === true;
}

/** Minimal slice of the fetch Response the client relies on. */
export interface HttpResponse {
  ok: boolean;
  status: number;
  json(): Promise<unknown>;
}

export type FetchLike = (url: string, init?: RequestInit) => Promise<HttpResponse>;

const defaultFetch: FetchLike = (url, init) => fetch(url, init);

export class ApiClient {
  constructor(
    private readonly base: string = "",
    private readonly fetchImpl: FetchLike = defaultFetch,
  ) {}

  private async request(path: string, init?: RequestInit): Promise<unknown> {
    const response = await this.fetchImpl(this.base + path, init);
    let body: unknown = null;
    try {
      body = await response.json();
    } catch {
      // Non-JSON body; the status is still meaningful.
    }
    if (!response.ok) {
      const detail =
        body && typeof body === "object" && "error" in body
          ? String((body as { error: unknown }).error)
          : `request failed with status ${response.status}`;
      throw new ApiError(response.status, detail);
    }
    return body;
  }

  private post(path: string, payload: unknown): Promise<unknown> {
    return this.request(path, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(payload),
    });
  }

  async openSession(annotatorName: string): Promise<SessionInfo> {
    const body = await this.post("/api/session", { annotator_name: annotatorName });
    return body as SessionInfo;
  }

  async nextPair(sessionId: string): Promise<NextPair> {
    const body = await this.request(`/api/session/${sessionId}/next`);
    return body as NextPair;
  }

  async submitAnswer(
    sessionId: string,
    pairId: string,
    verdict: Verdict,
    latencyMs: number,
  ): Promise<AnswerAck> {
    const body = await this.post(`/api/session/${sessionId}/answer`, {
      pair_id: pairId,
      answer: verdict,
      latency_ms: latencyMs,
    });
    return body as AnswerAck;
  }
}
