import type {
  JobJson,
  MergedResultJson,
  ProviderJson,
  UnifiedSearchJson,
} from "../src/types.js";

/** Shapes mirror live gateway responses (pinned by the backend's own
 * endpoint tests). */

export const PROVIDERS: ProviderJson[] = [
  { providerId: "alpha", baseUrl: "http://127.0.0.1:8301", modes: ["harvest", "search"], pollInterval: 3600 },
  { providerId: "beta", baseUrl: "http://127.0.0.1:8302/", modes: ["harvest"], pollInterval: 1800 },
];

export const TWO_SOURCE_RESULT: MergedResultJson = {
  fingerprint: "redes de computadores|silva a|2001",
  record: [
    { element: "title", value: "Redes de Computadores" },
    { element: "creator", value: "Silva, A." },
    { element: "identifier", value: "http://example.org/d/1" },
    { element: "date", qualifier: "issued", scheme: "W3CDTF", value: "2001-05-01" },
  ],
  sources: [
    { provider: "alpha", identifier: "oai:alpha:7", rank: 0 },
    { provider: "union", identifier: "oai:alpha:7", rank: 1 },
  ],
  score: 1.5,
};

export const HEALTHY_SEARCH: UnifiedSearchJson = {
  results: [TWO_SOURCE_RESULT],
  partial: false,
  outcomes: [
    { provider: "union", status: "ok", elapsedMs: 2 },
    { provider: "alpha", status: "ok", elapsedMs: 13 },
  ],
  total: 1,
};

export const PARTIAL_SEARCH: UnifiedSearchJson = {
  ...HEALTHY_SEARCH,
  partial: true,
  outcomes: [
    { provider: "union", status: "ok", elapsedMs: 2 },
    { provider: "alpha", status: "ok", elapsedMs: 13 },
    { provider: "beta", status: "timeout", elapsedMs: 2004 },
  ],
};

export const EMPTY_SEARCH: UnifiedSearchJson = {
  results: [],
  partial: false,
  outcomes: [{ provider: "union", status: "ok", elapsedMs: 1 }],
  total: 0,
};

export function job(state: JobJson["state"], overrides: Partial<JobJson> = {}): JobJson {
  return {
    jobId: "job-1",
    providerId: "alpha",
    kind: "full",
    state,
    counts: { fetched: 40, upserted: 38, deleted: 2, skipped: 0 },
    errorLog: [],
    startedAt: "2002-04-01T10:00:00Z",
    finishedAt: state === "succeeded" || state === "failed" ? "2002-04-01T10:00:05Z" : null,
    ...overrides,
  };
}
