"""The single query interface: fan a parsed query out to the union index
and every search-capable provider concurrently, tolerate the slow and the
broken, and consolidate what comes back into one deduplicated ranked list.

Cross-source ranks are fused reciprocally (1/(rank+1), rank 0-based within
each source) because provider scores are not comparable across systems.
Duplicates are detected by the record fingerprint; every merged result
keeps its per-source attributions.
"""

from __future__ import annotations

import json
import os
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from concurrent.futures import TimeoutError as FutureTimeoutError
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Optional

import requests

from .dc import MetadataRecord, fingerprint
from .harvester import ProviderDescriptor
from .jsonio import record_from_json, record_to_json
from .query import canonical_text, parse_query
from .union import UnionIndex

__all__ = [
    "RegistryError",
    "ProviderRegistry",
    "ProviderOutcome",
    "MergedResult",
    "UnifiedResponse",
    "broadcast",
    "merge",
    "Gateway",
    "PER_PROVIDER_DEADLINE_MS",
    "OVERALL_DEADLINE_MS",
]

PER_PROVIDER_DEADLINE_MS = 2000
OVERALL_DEADLINE_MS = 5000
FETCH_LIMIT = 1000
UNION_TARGET_ID = "union"


class RegistryError(ValueError):
    pass


class ProviderRegistry:
    """Ordered provider descriptors persisted as a JSON config document;
    mutations rewrite the file atomically and take effect immediately."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._lock = threading.Lock()
        self._providers: list[ProviderDescriptor] = []
        if self.path.exists():
            with open(self.path, "r", encoding="utf-8") as handle:
                document = json.load(handle)
            self._providers = [
                ProviderDescriptor.from_json(body) for body in document.get("providers", [])
            ]

    def _persist(self) -> None:
        temp = self.path.with_suffix(".tmp")
        document = {"providers": [p.to_json() for p in self._providers]}
        with open(temp, "w", encoding="utf-8") as handle:
            json.dump(document, handle, ensure_ascii=False, indent=2)
            handle.write("\n")
            handle.flush()
            os.fsync(handle.fileno())
        os.replace(temp, self.path)

    def add(self, descriptor: ProviderDescriptor) -> None:
        with self._lock:
            if descriptor.provider_id == UNION_TARGET_ID:
                raise RegistryError(f"{UNION_TARGET_ID!r} is reserved for the union index")
            if any(p.provider_id == descriptor.provider_id for p in self._providers):
                raise RegistryError(f"duplicate provider id {descriptor.provider_id!r}")
            self._providers.append(descriptor)
            self._persist()

    def remove(self, provider_id: str) -> None:
        with self._lock:
            remaining = [p for p in self._providers if p.provider_id != provider_id]
            if len(remaining) == len(self._providers):
                raise RegistryError(f"unknown provider id {provider_id!r}")
            self._providers = remaining
            self._persist()

    def list(self) -> list[ProviderDescriptor]:
        with self._lock:
            return list(self._providers)

    def get(self, provider_id: str) -> ProviderDescriptor:
        with self._lock:
            for provider in self._providers:
                if provider.provider_id == provider_id:
                    return provider
        raise RegistryError(f"unknown provider id {provider_id!r}")


@dataclass(frozen=True)
class SearchTarget:
    provider_id: str
    url: str  # full /search endpoint


@dataclass
class ProviderOutcome:
    provider_id: str
    status: str  # ok | timeout | error
    elapsed_ms: int
    records: list[tuple[str, MetadataRecord]] = field(default_factory=list)

    def to_json(self) -> dict:
        return {"provider": self.provider_id, "status": self.status, "elapsedMs": self.elapsed_ms}


@dataclass
class MergedResult:
    fingerprint: str
    best_record: MetadataRecord
    sources: list[tuple[str, str, int]]  # (providerId, identifier, rankAtSource)
    merged_score: Fraction

    def to_json(self) -> dict:
        return {
            "fingerprint": self.fingerprint,
            "record": record_to_json(self.best_record),
            "sources": [
                {"provider": p, "identifier": i, "rank": r} for p, i, r in self.sources
            ],
            "score": float(self.merged_score),
        }


@dataclass
class UnifiedResponse:
    results: list[MergedResult]
    partial: bool
    outcomes: list[ProviderOutcome]
    total: int

    def to_json(self) -> dict:
        return {
            "results": [r.to_json() for r in self.results],
            "partial": self.partial,
            "outcomes": [o.to_json() for o in self.outcomes],
            "total": self.total,
        }


def _query_target(
    session: requests.Session, target: SearchTarget, query_text: str, deadline_ms: int
) -> ProviderOutcome:
    started = time.monotonic()
    try:
        reply = session.post(
            target.url,
            json={"query": query_text, "start": 0, "max": FETCH_LIMIT},
            timeout=deadline_ms / 1000.0,
        )
        elapsed = int((time.monotonic() - started) * 1000)
        if reply.status_code != 200:
            return ProviderOutcome(target.provider_id, "error", elapsed)
        body = reply.json()
        records = [
            (entry["identifier"], record_from_json(entry["metadata"]))
            for entry in body["records"]
        ]
        return ProviderOutcome(target.provider_id, "ok", elapsed, records)
    except requests.Timeout:
        return ProviderOutcome(
            target.provider_id, "timeout", int((time.monotonic() - started) * 1000)
        )
    except (requests.RequestException, ValueError, KeyError, TypeError):
        return ProviderOutcome(
            target.provider_id, "error", int((time.monotonic() - started) * 1000)
        )


def broadcast(
    query_text: str,
    targets: list[SearchTarget],
    per_provider_deadline_ms: int = PER_PROVIDER_DEADLINE_MS,
    overall_deadline_ms: int = OVERALL_DEADLINE_MS,
    session: Optional[requests.Session] = None,
) -> list[ProviderOutcome]:
    """Contact every target's /search concurrently; failures and timeouts
    become outcomes, never exceptions. Outcomes keep target order."""
    if not targets:
        return []
    session = session or requests.Session()
    outcomes: list[Optional[ProviderOutcome]] = [None] * len(targets)
    started = time.monotonic()
    with ThreadPoolExecutor(max_workers=max(len(targets), 1)) as pool:
        futures = [
            pool.submit(_query_target, session, target, query_text, per_provider_deadline_ms)
            for target in targets
        ]
        for position, future in enumerate(futures):
            budget = overall_deadline_ms / 1000.0 - (time.monotonic() - started)
            try:
                outcomes[position] = future.result(timeout=max(budget, 0.0))
            except FutureTimeoutError:
                future.cancel()
                outcomes[position] = ProviderOutcome(
                    targets[position].provider_id,
                    "timeout",
                    int((time.monotonic() - started) * 1000),
                )
    return [outcome for outcome in outcomes if outcome is not None]


def merge(outcomes: list[ProviderOutcome]) -> list[MergedResult]:
    """Group ok-records by fingerprint and fuse ranks reciprocally. A pure
    function of the multiset of outcomes: reordering them changes nothing."""
    groups: dict[str, list[tuple[str, str, int, MetadataRecord]]] = {}
    for outcome in outcomes:
        if outcome.status != "ok":
            continue
        for rank, (identifier, record) in enumerate(outcome.records):
            key = fingerprint(record)
            groups.setdefault(key, []).append(
                (outcome.provider_id, identifier, rank, record)
            )
    results = []
    for key, hits in groups.items():
        hits.sort(key=lambda h: (h[0], h[1]))
        score = sum((Fraction(1, rank + 1) for _, _, rank, _ in hits), Fraction(0))
        best = min(hits, key=lambda h: (-len(h[3].statements), h[0], h[1]))
        results.append(
            MergedResult(
                fingerprint=key,
                best_record=best[3],
                sources=[(p, i, r) for p, i, r, _ in hits],
                merged_score=score,
            )
        )
    results.sort(key=lambda r: r.fingerprint)
    results.sort(key=lambda r: r.merged_score, reverse=True)
    return results


class Gateway:
    """Ties the registry, the union index and the broadcast path together;
    the HTTP layer in ``servers`` is a thin shell over this."""

    def __init__(
        self,
        registry: ProviderRegistry,
        union_index: UnionIndex,
        union_search_url: Optional[str] = None,
        per_provider_deadline_ms: int = PER_PROVIDER_DEADLINE_MS,
        overall_deadline_ms: int = OVERALL_DEADLINE_MS,
    ):
        self.registry = registry
        self.union_index = union_index
        self.union_search_url = union_search_url
        self.per_provider_deadline_ms = per_provider_deadline_ms
        self.overall_deadline_ms = overall_deadline_ms
        self.session = requests.Session()

    def targets(self) -> list[SearchTarget]:
        targets = []
        if self.union_search_url:
            targets.append(SearchTarget(UNION_TARGET_ID, self.union_search_url))
        for provider in self.registry.list():
            if "search" in provider.modes:
                targets.append(
                    SearchTarget(provider.provider_id, provider.base_url.rstrip("/") + "/search")
                )
        return targets

    def _union_outcome(self, query_text: str) -> ProviderOutcome:
        started = time.monotonic()
        try:
            _, hits = self.union_index.query(query_text, 0, FETCH_LIMIT)
            records = [(identifier, record) for _, identifier, _, record in hits]
            return ProviderOutcome(
                UNION_TARGET_ID, "ok", int((time.monotonic() - started) * 1000), records
            )
        except Exception:
            return ProviderOutcome(
                UNION_TARGET_ID, "error", int((time.monotonic() - started) * 1000)
            )

    def unified_search(self, query_text: str, start: int = 0, max_results: int = 10) -> UnifiedResponse:
        """Parse once, broadcast, merge, window. Raises QuerySyntaxError
        before any network activity on a malformed query."""
        if max_results < 1:
            raise ValueError("max_results must be >= 1")
        node = parse_query(query_text)
        normalized = canonical_text(node)
        targets = self.targets()
        outcomes: list[ProviderOutcome] = []
        if self.union_search_url is None:
            # in-process union index joins ahead of the HTTP targets
            outcomes.append(self._union_outcome(normalized))
        outcomes.extend(
            broadcast(
                normalized,
                targets,
                self.per_provider_deadline_ms,
                self.overall_deadline_ms,
                session=self.session,
            )
        )
        merged = merge(outcomes)
        window = merged[start : start + max_results]
        partial = any(outcome.status != "ok" for outcome in outcomes)
        return UnifiedResponse(window, partial, outcomes, total=len(merged))
