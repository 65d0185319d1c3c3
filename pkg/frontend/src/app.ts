import { ApiError, GatewayApi } from "./api.js";
import { clampPage, PAGE_SIZE, windowStart } from "./pagination.js";
import {
  renderCheckpoints,
  renderJobsTable,
  renderProvidersTable,
  renderQueryError,
  renderResults,
} from "./render.js";
import { createPoller } from "./poll.js";
import type { ProviderJson } from "./types.js";

const api = new GatewayApi("");
const JOB_POLL_MS = 2000;

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

let currentPage = 0;
let lastQuery = "";
let searchTicket = 0;
let knownProviders: ProviderJson[] = [];

async function runSearch(page: number): Promise<void> {
  const query = (el<HTMLInputElement>("query")).value.trim();
  if (!query) return;
  lastQuery = query;
  window.location.hash = encodeURIComponent(query);
  searchTicket += 1;
  const ticket = searchTicket;
  const pane = el<HTMLDivElement>("results");
  pane.setAttribute("aria-busy", "true");
  try {
    const response = await api.search(query, windowStart(page), PAGE_SIZE);
    if (ticket !== searchTicket) return; // a newer search already rendered
    currentPage = clampPage(page, response.total);
    pane.innerHTML = renderResults(response, currentPage, knownProviders);
  } catch (error) {
    if (ticket !== searchTicket) return;
    if (error instanceof ApiError) {
      pane.innerHTML = renderQueryError(error.message, query, error.offset);
    } else {
      pane.innerHTML = renderQueryError(String(error), query);
    }
  } finally {
    pane.removeAttribute("aria-busy");
  }
}

async function refreshProviders(): Promise<void> {
  try {
    knownProviders = await api.providers();
    el<HTMLDivElement>("providers").innerHTML = renderProvidersTable(knownProviders);
  } catch (error) {
    el<HTMLDivElement>("providers").innerHTML =
      `<div class="banner banner-error">${String(error)}</div>`;
  }
}

function flashOperationsError(message: string): void {
  const box = el<HTMLDivElement>("ops-error");
  box.textContent = message;
  box.style.display = "block";
  setTimeout(() => {
    box.style.display = "none";
  }, 6000);
}

function wireSearchPane(): void {
  el<HTMLFormElement>("search-form").addEventListener("submit", (event) => {
    event.preventDefault();
    void runSearch(0);
  });
  el<HTMLDivElement>("results").addEventListener("click", (event) => {
    const target = event.target as HTMLElement;
    const page = target.getAttribute("data-page");
    if (page !== null) {
      void runSearch(Number(page));
    }
  });
  const fromHash = decodeURIComponent(window.location.hash.replace(/^#/, ""));
  if (fromHash) {
    el<HTMLInputElement>("query").value = fromHash;
    void runSearch(0);
  }
}

function wireOperationsPane(): void {
  el<HTMLFormElement>("add-provider").addEventListener("submit", async (event) => {
    event.preventDefault();
    const modes: string[] = [];
    if (el<HTMLInputElement>("mode-harvest").checked) modes.push("harvest");
    if (el<HTMLInputElement>("mode-search").checked) modes.push("search");
    try {
      await api.addProvider({
        providerId: el<HTMLInputElement>("new-id").value.trim(),
        baseUrl: el<HTMLInputElement>("new-url").value.trim(),
        modes,
        pollInterval: Number(el<HTMLInputElement>("new-poll").value) || 3600,
      });
      (el<HTMLFormElement>("add-provider")).reset();
      await refreshProviders();
    } catch (error) {
      flashOperationsError(error instanceof ApiError ? error.message : String(error));
    }
  });

  el<HTMLDivElement>("providers").addEventListener("click", async (event) => {
    const target = event.target as HTMLElement;
    try {
      const removeId = target.getAttribute("data-remove");
      if (removeId) {
        await api.removeProvider(removeId);
        await refreshProviders();
        return;
      }
      const fullId = target.getAttribute("data-run-full");
      if (fullId) {
        await api.runHarvest(fullId, "full");
        return;
      }
      const incrementalId = target.getAttribute("data-run-incremental");
      if (incrementalId) {
        await api.runHarvest(incrementalId, "incremental");
      }
    } catch (error) {
      flashOperationsError(error instanceof ApiError ? error.message : String(error));
    }
  });
}

function wireTabs(): void {
  const tabs = document.querySelectorAll<HTMLButtonElement>("nav.tabs button");
  tabs.forEach((tab) => {
    tab.addEventListener("click", () => {
      tabs.forEach((t) => t.classList.toggle("active", t === tab));
      document.querySelectorAll<HTMLElement>("main > section").forEach((section) => {
        section.style.display = section.id === tab.dataset.pane ? "" : "none";
      });
    });
  });
}

function main(): void {
  wireTabs();
  wireSearchPane();
  wireOperationsPane();
  void refreshProviders();
  createPoller(
    () => api.jobs(),
    JOB_POLL_MS,
    (jobs) => {
      el<HTMLDivElement>("jobs").innerHTML = renderJobsTable(jobs);
    },
  ).start();
  createPoller(
    () => api.checkpoints(),
    JOB_POLL_MS,
    (checkpoints) => {
      el<HTMLDivElement>("checkpoints").innerHTML = renderCheckpoints(checkpoints);
    },
  ).start();
}

document.addEventListener("DOMContentLoaded", main);
