import type {
  JobJson,
  ProviderJson,
  UnifiedSearchJson,
} from "./types.js";

/** Error carrying whatever the gateway reported, including the byte offset
 * of a query syntax error. */
export class ApiError extends Error {
  status: number;
  offset?: number;

  constructor(message: string, status: number, offset?: number) {
    super(message);
    this.status = status;
    this.offset = offset;
  }
}

async function asJson<T>(reply: Response): Promise<T> {
  let body: unknown = null;
  try {
    body = await reply.json();
  } catch {
    // fall through: non-JSON error bodies keep the HTTP status text
  }
  if (!reply.ok) {
    const err = (body ?? {}) as { error?: string; offset?: number };
    throw new ApiError(err.error ?? reply.statusText, reply.status, err.offset);
  }
  return body as T;
}

export class GatewayApi {
  constructor(private base: string = "") {}

  search(query: string, start: number, max: number): Promise<UnifiedSearchJson> {
    const params = new URLSearchParams({
      q: query,
      start: String(start),
      max: String(max),
    });
    return fetch(`${this.base}/api/search?${params}`).then((r) =>
      asJson<UnifiedSearchJson>(r),
    );
  }

  providers(): Promise<ProviderJson[]> {
    return fetch(`${this.base}/api/providers`)
      .then((r) => asJson<{ providers: ProviderJson[] }>(r))
      .then((body) => body.providers);
  }

  addProvider(provider: ProviderJson): Promise<ProviderJson> {
    return fetch(`${this.base}/api/providers`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(provider),
    }).then((r) => asJson<ProviderJson>(r));
  }

  removeProvider(providerId: string): Promise<void> {
    return fetch(`${this.base}/api/providers/${encodeURIComponent(providerId)}`, {
      method: "DELETE",
    }).then((r) => asJson<unknown>(r)) as Promise<void>;
  }

  runHarvest(providerId: string, kind: "full" | "incremental"): Promise<JobJson> {
    const params = new URLSearchParams({ kind });
    return fetch(
      `${this.base}/api/harvest/${encodeURIComponent(providerId)}/run?${params}`,
      { method: "POST" },
    ).then((r) => asJson<JobJson>(r));
  }

  jobs(): Promise<JobJson[]> {
    return fetch(`${this.base}/api/harvest/jobs`)
      .then((r) => asJson<{ jobs: JobJson[] }>(r))
      .then((body) => body.jobs);
  }

  checkpoints(): Promise<Record<string, string>> {
    return fetch(`${this.base}/api/checkpoints`)
      .then((r) => asJson<{ checkpoints: Record<string, string> }>(r))
      .then((body) => body.checkpoints);
  }
}
