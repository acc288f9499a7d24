// Thin typed client for the /api/v1 endpoints. All state changes in the
// console go through exactly one method call here per user action.

import type {
  ApiErrorBody,
  FindingsDoc,
  QueueFilters,
  QueuePage,
  Release,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    public status: number,
    public code: string,
    message: string,
    public details: Record<string, unknown> = {},
  ) {
    super(message);
    this.name = "ApiError";
  }
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  constructor(
    private baseUrl: string,
    private token: string,
    private fetchFn: FetchLike = (input, init) => fetch(input, init),
  ) {
    this.baseUrl = baseUrl.replace(/\/+$/, "");
  }

  private async request<T>(
    method: "GET" | "POST",
    path: string,
    body?: unknown,
  ): Promise<T> {
    const init: RequestInit = {
      method,
      headers: {
        Authorization: `Bearer ${this.token}`,
        ...(body !== undefined ? { "Content-Type": "application/json" } : {}),
      },
      ...(body !== undefined ? { body: JSON.stringify(body) } : {}),
    };
    const response = await this.fetchFn(`${this.baseUrl}${path}`, init);
    if (!response.ok) {
      let parsed: Partial<ApiErrorBody> = {};
      try {
        parsed = (await response.json()) as ApiErrorBody;
      } catch {
        // non-JSON error body; fall through to the generic message
      }
      throw new ApiError(
        response.status,
        parsed.code ?? "HTTP_ERROR",
        parsed.message ?? `request failed with status ${response.status}`,
        parsed.details ?? {},
      );
    }
    return (await response.json()) as T;
  }

  queue(filters: QueueFilters = {}, page = 1, pageSize = 50): Promise<QueuePage> {
    const params = new URLSearchParams();
    params.set("page", String(page));
    params.set("page_size", String(pageSize));
    if (filters.ecosystem) params.set("ecosystem", filters.ecosystem);
    if (filters.license) params.set("license", filters.license);
    if (filters.state) params.set("state", filters.state);
    return this.request<QueuePage>("GET", `/api/v1/clearance-queue?${params}`);
  }

  findings(releaseId: string): Promise<FindingsDoc> {
    return this.request<FindingsDoc>(
      "GET",
      `/api/v1/releases/${encodeURIComponent(releaseId)}/findings`,
    );
  }

  decide(
    releaseId: string,
    verdict: "cleared" | "rejected",
    rationale: string,
  ): Promise<{ release: Release }> {
    return this.request<{ release: Release }>(
      "POST",
      `/api/v1/releases/${encodeURIComponent(releaseId)}/decision`,
      { verdict, rationale },
    );
  }
}
