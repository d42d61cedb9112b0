import type { HealthInfo, PredictRequest, PredictResponse } from "./types.js";

/** Typed form of the service's {code, message, field[, position]} errors. */
export class ServiceError extends Error {
  constructor(
    public status: number,
    public code: string,
    message: string,
    public field: string | null = null,
    public position: number | null = null,
  ) {
    super(message);
    this.name = "ServiceError";
  }
}

export interface PredictClient {
  predict(req: PredictRequest, signal?: AbortSignal): Promise<PredictResponse>;
}

export type FetchFn = (input: string, init?: RequestInit) => Promise<Response>;

/** Thin fetch wrapper; no retries or caching, errors stay typed. */
export class HttpClient implements PredictClient {
  constructor(
    public baseUrl: string,
    private fetchFn: FetchFn = (input, init) => fetch(input, init),
  ) {}

  async health(): Promise<HealthInfo> {
    const r = await this.fetchFn(`${this.baseUrl}/v1/health`);
    if (!r.ok) {
      throw new ServiceError(r.status, "health_failed", `health check returned ${r.status}`);
    }
    return (await r.json()) as HealthInfo;
  }

  async predict(req: PredictRequest, signal?: AbortSignal): Promise<PredictResponse> {
    const r = await this.fetchFn(`${this.baseUrl}/v1/predict`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(req),
      signal,
    });
    if (!r.ok) {
      let body: Record<string, unknown> = {};
      try {
        body = (await r.json()) as Record<string, unknown>;
      } catch {
        // non-JSON error body; fall through with the status alone
      }
      throw new ServiceError(
        r.status,
        typeof body.code === "string" ? body.code : "http_error",
        typeof body.message === "string" ? body.message : `request failed with ${r.status}`,
        typeof body.field === "string" ? body.field : null,
        typeof body.position === "number" ? body.position : null,
      );
    }
    return (await r.json()) as PredictResponse;
  }
}
