import type {
  ErrorEnvelope,
  ItemDetail,
  Metadata,
  QueryRequestBody,
  QueryResponse,
} from "./types.js";

/** A failure reported by (or on the way to) the service.
 *
 * `code` is the service's machine-readable error code; transport-level
 * failures get "network-error" so every failure mode has a code the UI
 * can render.
 */
export class ServiceError extends Error {
  constructor(
    readonly code: string,
    message: string,
    readonly field: string | null = null,
    readonly status: number | null = null,
  ) {
    super(message);
    this.name = "ServiceError";
  }
}

export type FetchLike = (
  url: string,
  init?: RequestInit,
) => Promise<Response>;

function isErrorEnvelope(body: unknown): body is ErrorEnvelope {
  if (typeof body !== "object" || body === null) return false;
  const error = (body as { error?: unknown }).error;
  return (
    typeof error === "object" &&
    error !== null &&
    typeof (error as { code?: unknown }).code === "string"
  );
}

export class ApiClient {
  private readonly base: string;
  private readonly fetchFn: FetchLike;

  constructor(baseUrl: string, fetchFn?: FetchLike) {
    this.base = baseUrl.replace(/\/+$/, "");
    const impl = fetchFn ?? globalThis.fetch;
    if (!impl) {
      throw new Error("no fetch implementation available");
    }
    this.fetchFn = impl.bind(globalThis);
  }

  get baseUrl(): string {
    return this.base;
  }

  async getMetadata(): Promise<Metadata> {
    return this.request<Metadata>("GET", "/metadata");
  }

  async getItem(id: number): Promise<ItemDetail> {
    return this.request<ItemDetail>("GET", `/items/${id}`);
  }

  async query(body: QueryRequestBody): Promise<QueryResponse> {
    return this.request<QueryResponse>("POST", "/query", body);
  }

  private async request<T>(
    method: string,
    path: string,
    body?: unknown,
  ): Promise<T> {
    let response: Response;
    try {
      response = await this.fetchFn(this.base + path, {
        method,
        headers: body === undefined
          ? undefined
          : { "content-type": "application/json" },
        body: body === undefined ? undefined : JSON.stringify(body),
      });
    } catch (cause) {
      const detail = cause instanceof Error ? cause.message : String(cause);
      throw new ServiceError(
        "network-error",
        `cannot reach ${this.base}: ${detail}`,
      );
    }

    let parsed: unknown = null;
    const text = await response.text();
    if (text !== "") {
      try {
        parsed = JSON.parse(text);
      } catch {
        parsed = null;
      }
    }

    if (!response.ok) {
      if (isErrorEnvelope(parsed)) {
        throw new ServiceError(
          parsed.error.code,
          parsed.error.message,
          parsed.error.field,
          response.status,
        );
      }
      throw new ServiceError(
        "http-error",
        `request failed with status ${response.status}`,
        null,
        response.status,
      );
    }
    return parsed as T;
  }
}
