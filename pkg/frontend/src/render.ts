import type {
  JobJson,
  MergedResultJson,
  OutcomeJson,
  ProviderJson,
  SourceJson,
  StatementJson,
  UnifiedSearchJson,
} from "./types.js";
import { byteOffsetToCharIndex, pageCount, PAGE_SIZE } from "./pagination.js";

export function escapeHtml(raw: string): string {
  return raw
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

function firstValue(record: StatementJson[], element: string): string | undefined {
  return record.find((s) => s.element === element)?.value;
}

function allValues(record: StatementJson[], element: string): string[] {
  return record.filter((s) => s.element === element).map((s) => s.value);
}

const OAI_ID = /^oai:[^:]+:([^:]+)$/;

/** Link back to the document stored at the source provider, when the
 * identifier is provider-minted and the provider's base URL is known. */
export function documentLink(
  source: SourceJson,
  providersById: Map<string, ProviderJson>,
): string | undefined {
  const match = OAI_ID.exec(source.identifier);
  const provider = providersById.get(source.provider);
  if (!match || !provider) return undefined;
  return `${provider.baseUrl.replace(/\/$/, "")}/documents/${match[1]}`;
}

export function renderSourceBadges(sources: SourceJson[]): string {
  return sources
    .map(
      (s) =>
        `<span class="badge" title="${escapeHtml(s.identifier)}">` +
        `${escapeHtml(s.provider)} #${s.rank}</span>`,
    )
    .join(" ");
}

function renderStatementRows(record: StatementJson[]): string {
  return record
    .map((s) => {
      const name = s.qualifier ? `${s.element}.${s.qualifier}` : s.element;
      const attrs = [s.scheme ? `scheme=${s.scheme}` : "", s.lang ? `lang=${s.lang}` : ""]
        .filter(Boolean)
        .join(" ");
      const value = /^https?:\/\//.test(s.value)
        ? `<a href="${escapeHtml(s.value)}" rel="noopener">${escapeHtml(s.value)}</a>`
        : escapeHtml(s.value);
      return (
        `<tr><td class="el">${escapeHtml(name)}</td>` +
        `<td class="attrs">${escapeHtml(attrs)}</td><td>${value}</td></tr>`
      );
    })
    .join("");
}

export function renderResultCard(
  result: MergedResultJson,
  providersById: Map<string, ProviderJson>,
): string {
  const title = firstValue(result.record, "title") ?? "(untitled)";
  const creators = allValues(result.record, "creator").join("; ");
  const date = firstValue(result.record, "date") ?? "";
  const links = result.sources
    .map((s) => {
      const href = documentLink(s, providersById);
      return href
        ? `<a class="doc-link" href="${escapeHtml(href)}" rel="noopener">document at ${escapeHtml(s.provider)}</a>`
        : "";
    })
    .filter(Boolean)
    .join(" ");
  return `<article class="result-card">
  <header>
    <h3>${escapeHtml(title)}</h3>
    <span class="score">${result.score.toFixed(3)}</span>
  </header>
  <p class="byline">${escapeHtml(creators)}${creators && date ? " — " : ""}${escapeHtml(date)}</p>
  <p class="sources">${renderSourceBadges(result.sources)}</p>
  <details>
    <summary>all statements</summary>
    <table class="statements">${renderStatementRows(result.record)}</table>
    <p class="doc-links">${links}</p>
  </details>
</article>`;
}

export function renderOutcomes(outcomes: OutcomeJson[]): string {
  return outcomes
    .map(
      (o) =>
        `<span class="outcome outcome-${o.status}">${escapeHtml(o.provider)}: ` +
        `${o.status} (${o.elapsedMs} ms)</span>`,
    )
    .join(" ");
}

export function renderResults(
  response: UnifiedSearchJson,
  page: number,
  providers: ProviderJson[],
): string {
  const providersById = new Map(providers.map((p) => [p.providerId, p]));
  const banner = response.partial
    ? `<div class="banner banner-partial" role="alert">Partial results: ` +
      escapeHtml(
        response.outcomes
          .filter((o) => o.status !== "ok")
          .map((o) => `${o.provider} (${o.status})`)
          .join(", "),
      ) +
      `</div>`
    : "";
  if (response.total === 0) {
    return `${banner}<div class="empty-state">No records matched this query.</div>
<div class="outcomes">${renderOutcomes(response.outcomes)}</div>`;
  }
  const cards = response.results.map((r) => renderResultCard(r, providersById)).join("\n");
  const pages = pageCount(response.total);
  return `${banner}
<p class="total">${response.total} consolidated result${response.total === 1 ? "" : "s"}</p>
${cards}
<nav class="pager">
  <button data-page="${page - 1}" ${page <= 0 ? "disabled" : ""}>previous</button>
  <span>page ${page + 1} of ${pages}</span>
  <button data-page="${page + 1}" ${page >= pages - 1 ? "disabled" : ""}>next</button>
</nav>
<div class="outcomes">${renderOutcomes(response.outcomes)}</div>`;
}

export function renderQueryError(message: string, queryText: string, offset?: number): string {
  if (offset === undefined) {
    return `<div class="banner banner-error" role="alert">${escapeHtml(message)}</div>`;
  }
  const caretAt = byteOffsetToCharIndex(queryText, offset);
  return `<div class="banner banner-error" role="alert">${escapeHtml(message)} (offset ${offset})
<pre class="query-caret">${escapeHtml(queryText)}\n${" ".repeat(caretAt)}^</pre></div>`;
}

export function renderProvidersTable(providers: ProviderJson[]): string {
  if (providers.length === 0) {
    return `<p class="empty-state">No providers registered.</p>`;
  }
  const rows = providers
    .map(
      (p) => `<tr>
  <td>${escapeHtml(p.providerId)}</td>
  <td>${escapeHtml(p.baseUrl)}</td>
  <td>${escapeHtml(p.modes.join(", "))}</td>
  <td>${p.pollInterval}s</td>
  <td>
    ${p.modes.includes("harvest") ? `<button data-run-full="${escapeHtml(p.providerId)}">full</button>
    <button data-run-incremental="${escapeHtml(p.providerId)}">incremental</button>` : ""}
    <button data-remove="${escapeHtml(p.providerId)}">remove</button>
  </td>
</tr>`,
    )
    .join("");
  return `<table class="providers">
<thead><tr><th>provider</th><th>base URL</th><th>modes</th><th>poll</th><th></th></tr></thead>
<tbody>${rows}</tbody></table>`;
}

export function renderJobsTable(jobs: JobJson[]): string {
  if (jobs.length === 0) {
    return `<p class="empty-state">No harvest jobs yet.</p>`;
  }
  const rows = jobs
    .map((j) => {
      const counts = `${j.counts.fetched}/${j.counts.upserted}/${j.counts.deleted}/${j.counts.skipped}`;
      const errors = j.errorLog.length
        ? `<details><summary>${j.errorLog.length} message(s)</summary><pre>${escapeHtml(
            j.errorLog.join("\n"),
          )}</pre></details>`
        : "";
      return `<tr class="job-${j.state}">
  <td>${escapeHtml(j.jobId)}</td>
  <td>${escapeHtml(j.providerId)}</td>
  <td>${escapeHtml(j.kind)}</td>
  <td class="state">${j.state}</td>
  <td title="fetched/upserted/deleted/skipped">${counts}</td>
  <td>${errors}</td>
</tr>`;
    })
    .join("");
  return `<table class="jobs">
<thead><tr><th>job</th><th>provider</th><th>kind</th><th>state</th><th>counts</th><th>log</th></tr></thead>
<tbody>${rows}</tbody></table>`;
}

export function renderCheckpoints(checkpoints: Record<string, string>): string {
  const entries = Object.entries(checkpoints).sort(([a], [b]) => a.localeCompare(b));
  if (entries.length === 0) {
    return `<p class="empty-state">No checkpoints yet.</p>`;
  }
  return (
    `<ul class="checkpoints">` +
    entries.map(([id, until]) => `<li>${escapeHtml(id)}: ${escapeHtml(until)}</li>`).join("") +
    `</ul>`
  );
}
