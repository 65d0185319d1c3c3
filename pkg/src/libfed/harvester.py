"""Service-provider synchronization: periodically pull each registered
provider's records into the union index, tombstones included, with
checkpointed incremental ranges, bounded retries and idempotent
last-write-wins application. Also the file-ingestion path for providers
that only drop HTML or tagged text files.

A failed job never moves a checkpoint. Incremental runs refetch a 60 s
overlap window behind the checkpoint to absorb clock skew; ``apply`` makes
the overlap harmless.
"""

from __future__ import annotations

import json
import logging
import os
import threading
import time
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Callable, Optional

import requests

from . import codecs
from .codecs import RecordHeader, WireRecord
from .datestamp import parse_datestamp, render_datestamp, shift, utcnow
from .harvest import HarvestResponse, HarvestResponseError, parse_harvest_response
from .union import IndexedEntry, UnionIndex

__all__ = [
    "ProviderDescriptor",
    "HarvestJob",
    "CheckpointStore",
    "JobStore",
    "Harvester",
    "HarvestScheduler",
    "apply_wire",
]

logger = logging.getLogger(__name__)

OVERLAP_SECONDS = 60
RETRY_ATTEMPTS = 3
RETRY_BACKOFF = (1.0, 2.0, 4.0)


@dataclass(frozen=True)
class ProviderDescriptor:
    provider_id: str
    base_url: str
    modes: tuple[str, ...] = ("harvest", "search")
    poll_interval: int = 3600

    def __post_init__(self):
        if not self.provider_id:
            raise ValueError("provider_id must be non-empty")
        modes = tuple(self.modes)
        if not modes or set(modes) - {"harvest", "search"}:
            raise ValueError("modes must be a non-empty subset of {harvest, search}")
        object.__setattr__(self, "modes", modes)

    def to_json(self) -> dict:
        return {
            "providerId": self.provider_id,
            "baseUrl": self.base_url,
            "modes": list(self.modes),
            "pollInterval": self.poll_interval,
        }

    @classmethod
    def from_json(cls, body: dict) -> "ProviderDescriptor":
        return cls(
            body["providerId"],
            body["baseUrl"],
            tuple(body.get("modes", ("harvest", "search"))),
            int(body.get("pollInterval", 3600)),
        )


@dataclass
class HarvestJob:
    job_id: str
    provider_id: str
    kind: str  # full | incremental | file-ingest
    state: str = "queued"  # queued -> running -> succeeded | failed
    counts: dict[str, int] = field(
        default_factory=lambda: {"fetched": 0, "upserted": 0, "deleted": 0, "skipped": 0}
    )
    error_log: list[str] = field(default_factory=list)
    started_at: Optional[str] = None
    finished_at: Optional[str] = None

    def to_json(self) -> dict:
        return {
            "jobId": self.job_id,
            "providerId": self.provider_id,
            "kind": self.kind,
            "state": self.state,
            "counts": dict(self.counts),
            "errorLog": list(self.error_log),
            "startedAt": self.started_at,
            "finishedAt": self.finished_at,
        }


class CheckpointStore:
    """providerId -> last successful `until`, monotonically non-decreasing,
    rewritten atomically on every advance."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._lock = threading.Lock()
        self._checkpoints: dict[str, str] = {}
        if self.path.exists():
            with open(self.path, "r", encoding="utf-8") as handle:
                self._checkpoints = json.load(handle)

    def get(self, provider_id: str) -> Optional[datetime]:
        with self._lock:
            stamp = self._checkpoints.get(provider_id)
        return parse_datestamp(stamp) if stamp else None

    def advance(self, provider_id: str, until: datetime) -> None:
        with self._lock:
            current = self._checkpoints.get(provider_id)
            if current is not None and parse_datestamp(current) > until:
                return
            self._checkpoints[provider_id] = render_datestamp(until)
            temp = self.path.with_suffix(".tmp")
            with open(temp, "w", encoding="utf-8") as handle:
                json.dump(self._checkpoints, handle, ensure_ascii=False, sort_keys=True)
                handle.flush()
                os.fsync(handle.fileno())
            os.replace(temp, self.path)

    def all(self) -> dict[str, str]:
        with self._lock:
            return dict(self._checkpoints)


class JobStore:
    """In-memory job registry; terminal jobs are appended to a history file."""

    def __init__(self, history_path: Optional[str | Path] = None):
        self.history_path = Path(history_path) if history_path else None
        self._lock = threading.Lock()
        self._jobs: list[HarvestJob] = []
        self._counter = 0

    def create(self, provider_id: str, kind: str) -> HarvestJob:
        with self._lock:
            self._counter += 1
            job = HarvestJob(f"job-{self._counter}", provider_id, kind)
            self._jobs.append(job)
            return job

    def start(self, job: HarvestJob) -> None:
        with self._lock:
            job.state = "running"
            job.started_at = render_datestamp(utcnow())

    def finish(self, job: HarvestJob, succeeded: bool) -> None:
        with self._lock:
            job.state = "succeeded" if succeeded else "failed"
            job.finished_at = render_datestamp(utcnow())
            if self.history_path is not None:
                with open(self.history_path, "a", encoding="utf-8") as handle:
                    handle.write(json.dumps(job.to_json(), ensure_ascii=False) + "\n")

    def jobs(self) -> list[HarvestJob]:
        with self._lock:
            return list(self._jobs)

    def running_for(self, provider_id: str) -> bool:
        with self._lock:
            return any(
                j.provider_id == provider_id and j.state in ("queued", "running")
                for j in self._jobs
            )


def apply_wire(index: UnionIndex, wire: WireRecord, provider_id: str) -> str:
    """Reconcile one harvested record into the index. Last write wins by
    header datestamp; ties go to the incoming record (the provider is
    authoritative). Returns 'upserted', 'deleted' or 'skipped'."""
    stored = index.get(provider_id, wire.header.identifier)
    if stored is not None and wire.header.datestamp < stored.header.datestamp:
        return "skipped"
    if wire.header.deleted:
        if (
            stored is not None
            and stored.header.deleted
            and stored.header.datestamp == wire.header.datestamp
        ):
            return "skipped"
        index.mark_deleted(provider_id, wire.header.identifier, wire.header.datestamp)
        return "deleted"
    entry = IndexedEntry(provider_id, wire.header, wire.record)
    if stored is not None and stored == entry:
        return "skipped"
    index.upsert(entry)
    return "upserted"


class HarvestTransportError(RuntimeError):
    pass


class Harvester:
    def __init__(
        self,
        index: UnionIndex,
        checkpoints: CheckpointStore,
        jobs: Optional[JobStore] = None,
        timeout: float = 30.0,
        backoff: tuple[float, ...] = RETRY_BACKOFF,
        session: Optional[requests.Session] = None,
    ):
        self.index = index
        self.checkpoints = checkpoints
        self.jobs = jobs if jobs is not None else JobStore()
        self.timeout = timeout
        self.backoff = backoff
        self.session = session or requests.Session()
        self._provider_locks: dict[str, threading.Lock] = {}
        self._locks_guard = threading.Lock()

    def _provider_lock(self, provider_id: str) -> threading.Lock:
        with self._locks_guard:
            return self._provider_locks.setdefault(provider_id, threading.Lock())

    # --- transport ----------------------------------------------------------

    def _fetch(self, base_url: str, params: dict[str, str]) -> HarvestResponse:
        url = base_url.rstrip("/") + "/oai"
        last_error: Optional[Exception] = None
        for attempt in range(RETRY_ATTEMPTS):
            try:
                reply = self.session.get(url, params=params, timeout=self.timeout)
                reply.raise_for_status()
                return parse_harvest_response(reply.content)
            except (requests.RequestException, HarvestResponseError) as exc:
                last_error = exc
                if attempt + 1 < RETRY_ATTEMPTS:
                    time.sleep(self.backoff[min(attempt, len(self.backoff) - 1)])
        raise HarvestTransportError(f"{url}: {last_error}")

    # --- harvest runs ---------------------------------------------------------

    def run_full(self, provider: ProviderDescriptor) -> HarvestJob:
        """Page through the provider's whole collection and reconcile it."""
        return self._run(provider, kind="full", from_=None)

    def run_incremental(self, provider: ProviderDescriptor) -> HarvestJob:
        """Harvest changes since the checkpoint, refetching a 60 s overlap
        window; falls back to a full run when no checkpoint exists."""
        return self._run(provider, kind="incremental", from_=None)

    def run_async(self, provider: ProviderDescriptor, kind: str) -> HarvestJob:
        """Create the job now, run it on a background thread; callers poll
        the job store for queued -> running -> terminal transitions."""
        if "harvest" not in provider.modes:
            raise ValueError(f"provider {provider.provider_id} has no harvest mode")
        job = self.jobs.create(provider.provider_id, kind)
        thread = threading.Thread(
            target=self._execute, args=(provider, kind, job), daemon=True
        )
        thread.start()
        return job

    def _run(
        self, provider: ProviderDescriptor, kind: str, from_: Optional[datetime]
    ) -> HarvestJob:
        if "harvest" not in provider.modes:
            raise ValueError(f"provider {provider.provider_id} has no harvest mode")
        job = self.jobs.create(provider.provider_id, kind)
        self._execute(provider, kind, job, from_)
        return job

    def _execute(
        self,
        provider: ProviderDescriptor,
        kind: str,
        job: HarvestJob,
        from_: Optional[datetime] = None,
    ) -> None:
        if kind == "incremental" and from_ is None:
            checkpoint = self.checkpoints.get(provider.provider_id)
            if checkpoint is not None:
                from_ = shift(checkpoint, -OVERLAP_SECONDS)
        lock = self._provider_lock(provider.provider_id)
        with lock:
            self.jobs.start(job)
            try:
                until = self._pump(provider, job, from_)
            except (HarvestTransportError, HarvestResponseError) as exc:
                job.error_log.append(str(exc))
                self.jobs.finish(job, succeeded=False)
                return
            self.checkpoints.advance(provider.provider_id, until)
            self.jobs.finish(job, succeeded=True)

    def _pump(
        self, provider: ProviderDescriptor, job: HarvestJob, from_: Optional[datetime]
    ) -> datetime:
        """Fetch every page, apply every record; returns the first page's
        respondedAt, the new checkpoint on success."""
        params: dict[str, str] = {"verb": "ListRecords"}
        if from_ is not None:
            params["from"] = render_datestamp(from_)
        response = self._fetch(provider.base_url, params)
        first_responded_at = response.responded_at
        while True:
            if response.error_code == "noRecordsMatch":
                return first_responded_at
            if response.error_code is not None:
                raise HarvestResponseError(
                    f"{response.error_code}: {response.error_message or ''}"
                )
            for wire in response.records:
                job.counts["fetched"] += 1
                outcome = apply_wire(self.index, wire, provider.provider_id)
                job.counts[outcome] += 1
            if response.resumption_token is None:
                return first_responded_at
            response = self._fetch(
                provider.base_url,
                {"verb": "ListRecords", "resumptionToken": response.resumption_token},
            )

    # --- file ingestion -------------------------------------------------------

    def ingest_files(
        self,
        directory: str | Path,
        virtual_provider_id: str,
        now: Optional[datetime] = None,
    ) -> HarvestJob:
        """Parse gathered .html/.htm/.txt files into the index under a
        virtual provider. Re-ingesting unchanged files is a no-op: an entry
        whose parsed record equals the stored one is left untouched."""
        now = now or utcnow()
        job = self.jobs.create(virtual_provider_id, "file-ingest")
        lock = self._provider_lock(virtual_provider_id)
        with lock:
            self.jobs.start(job)
            directory = Path(directory)
            candidates = sorted(
                p
                for p in directory.iterdir()
                if p.is_file() and p.suffix.lower() in (".html", ".htm", ".txt")
            )
            parsed_any = not candidates
            for path in candidates:
                try:
                    records = self._parse_file(path, job)
                except OSError as exc:
                    job.error_log.append(f"{path.name}: {exc}")
                    continue
                parsed_any = parsed_any or bool(records)
                if not records:
                    continue
                for record in records:
                    job.counts["fetched"] += 1
                    identifier = record.first("identifier") or (
                        "hash:" + codecs.record_digest(record)
                    )
                    stored = self.index.get(virtual_provider_id, identifier)
                    if (
                        stored is not None
                        and not stored.header.deleted
                        and stored.record == record
                    ):
                        job.counts["skipped"] += 1
                        continue
                    entry = IndexedEntry(
                        virtual_provider_id, RecordHeader(identifier, now), record
                    )
                    self.index.upsert(entry)
                    job.counts["upserted"] += 1
            self.jobs.finish(job, succeeded=parsed_any)
            return job

    def _parse_file(self, path: Path, job: HarvestJob):
        data = path.read_bytes()
        if path.suffix.lower() in (".html", ".htm"):
            record, warnings = codecs.extract_dc_from_html(data)
            parsed = [(record, warnings)]
        else:
            parsed = codecs.parse_tagged_text(data)
        records = []
        for record, warnings in parsed:
            for warning in warnings:
                job.error_log.append(f"{path.name}: {warning}")
            if not record.statements:
                job.error_log.append(f"{path.name}: no statements found, skipped")
                continue
            records.append(record)
        return records


class HarvestScheduler:
    """Background loop that triggers an incremental run per provider every
    poll interval. The first run happens one interval after start; at most
    one job per provider is in flight at a time."""

    def __init__(
        self,
        harvester: Harvester,
        providers: Callable[[], list[ProviderDescriptor]],
        tick_seconds: float = 1.0,
    ):
        self.harvester = harvester
        self.providers = providers
        self.tick_seconds = tick_seconds
        self._stop = threading.Event()
        self._thread: Optional[threading.Thread] = None
        self._last_run: dict[str, float] = {}

    def start(self) -> None:
        if self._thread is not None:
            return
        self._thread = threading.Thread(target=self._loop, name="harvest-scheduler", daemon=True)
        self._thread.start()

    def stop(self) -> None:
        self._stop.set()
        if self._thread is not None:
            self._thread.join(timeout=5)
            self._thread = None

    def _loop(self) -> None:
        while not self._stop.wait(self.tick_seconds):
            for provider in self.providers():
                if "harvest" not in provider.modes:
                    continue
                last = self._last_run.setdefault(provider.provider_id, time.monotonic())
                if time.monotonic() - last < provider.poll_interval:
                    continue
                if self.harvester.jobs.running_for(provider.provider_id):
                    continue
                self._last_run[provider.provider_id] = time.monotonic()
                try:
                    self.harvester.run_incremental(provider)
                except Exception:  # pragma: no cover - defensive
                    logger.exception("scheduled harvest of %s failed", provider.provider_id)
