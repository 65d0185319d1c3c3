"""The repository a data-providing institution runs: author submissions,
document storage, tombstoning deletes, and a local search — all durable
through the journal and exposed over HTTP by ``servers``.

Writes are serialized per repository; harvest and search requests read a
consistent snapshot taken under the same lock, so a page never observes a
half-applied write.
"""

from __future__ import annotations

import base64
import threading
from dataclasses import dataclass
from datetime import datetime
from pathlib import Path
from typing import Optional

from .codecs import RecordHeader, WireRecord
from .datestamp import parse_datestamp, render_datestamp
from .dc import MetadataRecord, PROFILES, validate_record
from .harvest import RepositoryInfo
from .journal import Journal
from .jsonio import record_from_json, record_to_json
from .query import parse_query, eval_query

__all__ = [
    "RepositoryConfig",
    "StoredItem",
    "ProviderStore",
    "SubmissionInvalid",
    "UnknownIdentifierError",
    "DeletedItemError",
    "ClockSkewError",
]

DEFAULT_DOCUMENT_CAP = 64 * 1024 * 1024


@dataclass(frozen=True)
class RepositoryConfig:
    repository_id: str
    display_name: str = ""
    admin_contact: str = ""
    listen_address: str = "127.0.0.1:0"
    page_size: int = 100
    max_document_bytes: int = DEFAULT_DOCUMENT_CAP

    def __post_init__(self):
        if not self.repository_id or ":" in self.repository_id:
            raise ValueError("repository_id must be non-empty and colon-free")
        if self.page_size < 1:
            raise ValueError("page_size must be >= 1")

    def info(self) -> RepositoryInfo:
        return RepositoryInfo(
            self.repository_id, self.display_name, self.admin_contact, self.page_size
        )


class SubmissionInvalid(ValueError):
    def __init__(self, violations: list[str]):
        super().__init__("; ".join(violations))
        self.violations = violations


class UnknownIdentifierError(KeyError):
    pass


class DeletedItemError(ValueError):
    pass


class ClockSkewError(ValueError):
    pass


@dataclass(frozen=True)
class StoredItem:
    local_id: int
    header: RecordHeader
    kind: str
    record: Optional[MetadataRecord] = None
    document: Optional[bytes] = None
    media_type: str = "application/octet-stream"

    def wire(self) -> WireRecord:
        return WireRecord(self.header, self.record)


class ProviderStore:
    """In-memory item map backed by the journal; open() recovers the exact
    pre-shutdown state including tombstones and the local-id counter."""

    def __init__(self, config: RepositoryConfig, data_dir: str | Path, fsync: bool = False):
        self.config = config
        self._lock = threading.RLock()
        self._items: dict[int, StoredItem] = {}
        self._next_local_id = 1
        self._journal = Journal(data_dir, fsync=fsync)
        self._recover()

    @classmethod
    def open(cls, config: RepositoryConfig, data_dir: str | Path, fsync: bool = False):
        return cls(config, data_dir, fsync=fsync)

    # --- persistence ------------------------------------------------------

    def _recover(self) -> None:
        state, tail = self._journal.recover()
        if state is not None:
            self._next_local_id = int(state["next_local_id"])
            for body in state["items"]:
                item = self._item_from_json(body)
                self._items[item.local_id] = item
        for op in tail:
            self._replay(op)

    def _replay(self, op: dict) -> None:
        kind = op["op"]
        if kind == "submit":
            item = self._item_from_json(op["item"])
            self._items[item.local_id] = item
            self._next_local_id = max(self._next_local_id, item.local_id + 1)
        elif kind == "update":
            local_id = int(op["local_id"])
            current = self._items[local_id]
            header = RecordHeader(
                current.header.identifier, parse_datestamp(op["datestamp"])
            )
            self._items[local_id] = StoredItem(
                local_id,
                header,
                current.kind,
                record_from_json(op["metadata"]),
                current.document,
                current.media_type,
            )
        elif kind == "delete":
            local_id = int(op["local_id"])
            current = self._items[local_id]
            header = RecordHeader(
                current.header.identifier, parse_datestamp(op["datestamp"]), deleted=True
            )
            self._items[local_id] = StoredItem(local_id, header, current.kind)
        else:
            raise ValueError(f"unknown journal op {kind!r}")

    def _item_to_json(self, item: StoredItem) -> dict:
        body: dict = {
            "local_id": item.local_id,
            "identifier": item.header.identifier,
            "datestamp": render_datestamp(item.header.datestamp),
            "deleted": item.header.deleted,
            "kind": item.kind,
        }
        if item.record is not None:
            body["metadata"] = record_to_json(item.record)
        if item.document is not None:
            body["document"] = base64.b64encode(item.document).decode("ascii")
            body["media_type"] = item.media_type
        return body

    def _item_from_json(self, body: dict) -> StoredItem:
        document = None
        if "document" in body:
            document = base64.b64decode(body["document"])
        return StoredItem(
            int(body["local_id"]),
            RecordHeader(
                body["identifier"],
                parse_datestamp(body["datestamp"]),
                deleted=bool(body["deleted"]),
            ),
            body["kind"],
            record_from_json(body["metadata"]) if "metadata" in body else None,
            document,
            body.get("media_type", "application/octet-stream"),
        )

    def write_snapshot(self) -> None:
        with self._lock:
            state = {
                "next_local_id": self._next_local_id,
                "items": [self._item_to_json(i) for i in sorted(self._items.values(), key=lambda i: i.local_id)],
            }
            self._journal.write_snapshot(state)

    def close(self) -> None:
        with self._lock:
            self.write_snapshot()
            self._journal.close()

    # --- writes -------------------------------------------------------------

    def _identifier(self, local_id: int) -> str:
        return f"oai:{self.config.repository_id}:{local_id}"

    def submit(
        self,
        record: MetadataRecord,
        kind: str,
        now: datetime,
        document: Optional[bytes] = None,
        media_type: str = "application/octet-stream",
    ) -> str:
        profile = PROFILES.get(kind)
        if profile is None:
            raise SubmissionInvalid([f"unknown document kind {kind!r}"])
        violations = validate_record(record, profile)
        if violations:
            raise SubmissionInvalid(violations)
        if document is not None and len(document) > self.config.max_document_bytes:
            raise SubmissionInvalid(["document exceeds the size cap"])
        with self._lock:
            local_id = self._next_local_id
            self._next_local_id += 1
            header = RecordHeader(self._identifier(local_id), now)
            item = StoredItem(local_id, header, kind, record, document, media_type)
            self._journal.append({"op": "submit", "item": self._item_to_json(item)})
            self._items[local_id] = item
            return header.identifier

    def _resolve(self, identifier: str) -> StoredItem:
        for item in self._items.values():
            if item.header.identifier == identifier:
                return item
        raise UnknownIdentifierError(identifier)

    def update(self, identifier: str, record: MetadataRecord, now: datetime) -> datetime:
        with self._lock:
            item = self._resolve(identifier)
            if item.header.deleted:
                raise DeletedItemError(f"{identifier} is deleted")
            violations = validate_record(record, PROFILES[item.kind])
            if violations:
                raise SubmissionInvalid(violations)
            if now < item.header.datestamp:
                raise ClockSkewError(
                    f"write at {render_datestamp(now)} is earlier than the item's "
                    f"datestamp {render_datestamp(item.header.datestamp)}"
                )
            self._journal.append(
                {
                    "op": "update",
                    "local_id": item.local_id,
                    "datestamp": render_datestamp(now),
                    "metadata": record_to_json(record),
                }
            )
            header = RecordHeader(identifier, now)
            self._items[item.local_id] = StoredItem(
                item.local_id, header, item.kind, record, item.document, item.media_type
            )
            return now

    def delete(self, identifier: str, now: datetime) -> datetime:
        with self._lock:
            item = self._resolve(identifier)
            if item.header.deleted:
                raise DeletedItemError(f"{identifier} is already deleted")
            if now < item.header.datestamp:
                raise ClockSkewError(
                    f"write at {render_datestamp(now)} is earlier than the item's "
                    f"datestamp {render_datestamp(item.header.datestamp)}"
                )
            self._journal.append(
                {"op": "delete", "local_id": item.local_id, "datestamp": render_datestamp(now)}
            )
            header = RecordHeader(identifier, now, deleted=True)
            self._items[item.local_id] = StoredItem(item.local_id, header, item.kind)
            return now

    # --- reads --------------------------------------------------------------

    def snapshot_wire(self) -> tuple[WireRecord, ...]:
        """Consistent harvest snapshot: every item, tombstones included."""
        with self._lock:
            return tuple(item.wire() for item in self._items.values())

    def get(self, identifier: str) -> StoredItem:
        with self._lock:
            return self._resolve(identifier)

    def document(self, local_id: int) -> tuple[bytes, str]:
        with self._lock:
            item = self._items.get(local_id)
            if item is None or item.header.deleted or item.document is None:
                raise UnknownIdentifierError(str(local_id))
            return item.document, item.media_type

    def live_items(self) -> list[StoredItem]:
        with self._lock:
            return [i for i in self._items.values() if not i.header.deleted]

    def search_items(
        self, query_text: str, start: int = 0, max_results: int = 10
    ) -> tuple[int, list[StoredItem]]:
        if max_results < 1:
            raise ValueError("max_results must be >= 1")
        node = parse_query(query_text)
        matches = [
            item
            for item in self.live_items()
            if item.record is not None and eval_query(node, item.record)
        ]
        matches.sort(key=lambda i: i.header.identifier)
        matches.sort(key=lambda i: i.header.datestamp, reverse=True)
        return len(matches), matches[start : start + max_results]

    def search_local(
        self, query_text: str, start: int = 0, max_results: int = 10
    ) -> tuple[int, list[tuple[str, MetadataRecord]]]:
        """Live items matching the query, newest first; (total, window)."""
        total, items = self.search_items(query_text, start, max_results)
        return total, [(i.header.identifier, i.record) for i in items]

    def __len__(self) -> int:
        with self._lock:
            return len(self._items)
