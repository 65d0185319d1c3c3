/** JSON shapes of the gateway API. The portal is a pure presenter: every
 * number it shows originates from one of these responses. */

export interface StatementJson {
  element: string;
  qualifier?: string;
  scheme?: string;
  lang?: string;
  value: string;
}

export interface SourceJson {
  provider: string;
  identifier: string;
  rank: number;
}

export interface MergedResultJson {
  fingerprint: string;
  record: StatementJson[];
  sources: SourceJson[];
  score: number;
}

export interface OutcomeJson {
  provider: string;
  status: "ok" | "timeout" | "error";
  elapsedMs: number;
}

export interface UnifiedSearchJson {
  results: MergedResultJson[];
  partial: boolean;
  outcomes: OutcomeJson[];
  total: number;
}

export interface ProviderJson {
  providerId: string;
  baseUrl: string;
  modes: string[];
  pollInterval: number;
}

export interface JobCounts {
  fetched: number;
  upserted: number;
  deleted: number;
  skipped: number;
}

export interface JobJson {
  jobId: string;
  providerId: string;
  kind: string;
  state: "queued" | "running" | "succeeded" | "failed";
  counts: JobCounts;
  errorLog: string[];
  startedAt: string | null;
  finishedAt: string | null;
}

export interface ErrorJson {
  error: string;
  offset?: number;
  violations?: string[];
}
