/**
 * Thin typed client for the elicitation service. One base-URL setting;
 * every response is schema-validated before use.
 */

import {
  Answer,
  AnswerSchema,
  PairPayload,
  PairPayloadSchema,
  ResultsResponse,
  ResultsResponseSchema,
  SessionSnapshot,
  SessionSnapshotSchema,
} from "./schema.js";

export type FetchLike = (
  url: string,
  init?: { method?: string; headers?: Record<string, string>; body?: string },
) => Promise<{ status: number; json(): Promise<unknown> }>;

export class ApiError extends Error {
  constructor(
    readonly status: number,
    message: string,
  ) {
    super(message);
  }
}

export class ApiClient {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchImpl: FetchLike = (...args) => fetch(...args),
  ) {}

  private async request(
    method: string,
    path: string,
    body?: unknown,
  ): Promise<unknown> {
    const response = await this.fetchImpl(`${this.baseUrl}${path}`, {
      method,
      headers: body === undefined ? {} : { "content-type": "application/json" },
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    const payload = await response.json().catch(() => ({}));
    if (response.status >= 400) {
      const detail =
        typeof payload === "object" && payload !== null && "detail" in payload
          ? String((payload as { detail: unknown }).detail)
          : `HTTP ${response.status}`;
      throw new ApiError(response.status, detail);
    }
    return payload;
  }

  async createSession(plan: Record<string, unknown> = {}): Promise<SessionSnapshot> {
    const raw = await this.request("POST", "/sessions", { plan });
    return SessionSnapshotSchema.parse(raw);
  }

  async getSession(sessionId: string): Promise<SessionSnapshot> {
    return SessionSnapshotSchema.parse(
      await this.request("GET", `/sessions/${sessionId}`),
    );
  }

  async nextPair(sessionId: string): Promise<PairPayload> {
    return PairPayloadSchema.parse(
      await this.request("GET", `/sessions/${sessionId}/next-pair`),
    );
  }

  /** Validates locally before sending; invalid answers never leave the client. */
  async submitAnswer(sessionId: string, answer: Answer): Promise<void> {
    const checked = AnswerSchema.parse(answer);
    await this.request("POST", `/sessions/${sessionId}/answers`, checked);
  }

  async startInference(sessionId: string): Promise<void> {
    await this.request("POST", `/sessions/${sessionId}/inference`);
  }

  async results(sessionId: string): Promise<ResultsResponse> {
    return ResultsResponseSchema.parse(
      await this.request("GET", `/sessions/${sessionId}/results`),
    );
  }
}
