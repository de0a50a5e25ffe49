// Thin typed client over the planning service's HTTP API. Plan calls are
// cancel-and-replace: at most one is in flight, a new submission aborts the
// previous one.

import type {
  IngestResponse,
  PlanResponse,
  PoiListResponse,
  ServiceError,
} from "./types";

export class PlanServiceError extends Error {
  readonly stage: string;
  readonly code: string;

  constructor(detail: ServiceError) {
    super(detail.message);
    this.stage = detail.stage;
    this.code = detail.code;
  }
}

async function readError(res: Response): Promise<PlanServiceError> {
  try {
    const body = (await res.json()) as ServiceError;
    if (body && body.stage && body.message !== undefined) {
      return new PlanServiceError(body);
    }
  } catch {
    // fall through to the generic error below
  }
  return new PlanServiceError({
    code: `http_${res.status}`,
    stage: "service",
    message: res.statusText || `request failed (${res.status})`,
  });
}

export class PlannerApi {
  private inflightPlan: AbortController | null = null;

  constructor(private readonly baseUrl: string = "") {}

  async plan(request: string, city: string, style = ""): Promise<PlanResponse> {
    this.inflightPlan?.abort();
    const controller = new AbortController();
    this.inflightPlan = controller;
    const res = await fetch(`${this.baseUrl}/v1/plan`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ request, city, style }),
      signal: controller.signal,
    });
    if (this.inflightPlan === controller) {
      this.inflightPlan = null;
    }
    if (!res.ok) {
      throw await readError(res);
    }
    return (await res.json()) as PlanResponse;
  }

  async pois(city: string, page = 1, pageSize = 200): Promise<PoiListResponse> {
    const params = new URLSearchParams({
      city,
      page: String(page),
      page_size: String(pageSize),
    });
    const res = await fetch(`${this.baseUrl}/v1/pois?${params}`);
    if (!res.ok) {
      throw await readError(res);
    }
    return (await res.json()) as PoiListResponse;
  }

  async ingest(postText: string, city: string): Promise<IngestResponse> {
    const res = await fetch(`${this.baseUrl}/v1/pois/ingest`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ post_text: postText, city }),
    });
    if (!res.ok) {
      throw await readError(res);
    }
    return (await res.json()) as IngestResponse;
  }
}
