// Typed client for the exploration service; no payload reshaping beyond
// unwrapping the version envelope, so displayed strings stay byte-exact.

import type {
  BatchDoc,
  Envelope,
  FeedbackDoc,
  FeedbackSummary,
  MetricsDoc,
  PredictionDoc,
  SessionResource,
} from "./types.js";

export class ServiceError extends Error {
  readonly code: string;
  readonly status: number;
  readonly field?: string;

  constructor(status: number, code: string, message: string, field?: string) {
    super(message);
    this.code = code;
    this.status = status;
    this.field = field;
  }
}

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export interface CreateSessionRequest {
  dataset_id: string;
  seed?: number;
  config?: Record<string, unknown>;
  attach_truth?: boolean;
}

export class SessionClient {
  private readonly base: string;
  private readonly fetchImpl: FetchLike;

  constructor(baseUrl: string, fetchImpl?: FetchLike) {
    this.base = baseUrl.replace(/\/+$/, "");
    this.fetchImpl = fetchImpl ?? ((url, init) => fetch(url, init));
  }

  private async call<T>(path: string, init?: RequestInit): Promise<T> {
    let res: Response;
    try {
      res = await this.fetchImpl(`${this.base}${path}`, init);
    } catch (err) {
      throw new ServiceError(0, "network", `service unreachable: ${String(err)}`);
    }
    let body: Envelope<T>;
    try {
      body = (await res.json()) as Envelope<T>;
    } catch {
      throw new ServiceError(res.status, "bad-envelope", "response was not JSON");
    }
    if (body.error) {
      throw new ServiceError(res.status, body.error.code, body.error.message, body.error.field);
    }
    if (!res.ok || body.data === undefined) {
      throw new ServiceError(res.status, "bad-envelope", "missing data in response");
    }
    return body.data;
  }

  createSession(req: CreateSessionRequest): Promise<SessionResource> {
    return this.call<SessionResource>("/v1/sessions", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(req),
    });
  }

  getSession(id: string): Promise<SessionResource> {
    return this.call<SessionResource>(`/v1/sessions/${id}`);
  }

  getBatch(id: string): Promise<BatchDoc> {
    return this.call<BatchDoc>(`/v1/sessions/${id}/batch`);
  }

  postFeedback(id: string, doc: FeedbackDoc): Promise<FeedbackSummary> {
    return this.call<FeedbackSummary>(`/v1/sessions/${id}/feedback`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(doc),
    });
  }

  getPrediction(id: string): Promise<PredictionDoc> {
    return this.call<PredictionDoc>(`/v1/sessions/${id}/prediction`);
  }

  getMetrics(id: string): Promise<MetricsDoc> {
    return this.call<MetricsDoc>(`/v1/sessions/${id}/metrics`);
  }

  terminate(id: string): Promise<SessionResource> {
    return this.call<SessionResource>(`/v1/sessions/${id}/terminate`, { method: "POST" });
  }
}
