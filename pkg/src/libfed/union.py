"""The centralized metadata database: keyed storage of harvested entries,
an inverted index over (element, token) postings, ranked query evaluation,
and journal-backed persistence.

Scoring is additive field-weighted term frequency: each distinct clause of
the query that matches a record contributes weight(field) x tf, where the
weights are title 3, creator 2, subject 2, anything else 1, and an
unfielded clause takes the best single field. No corpus statistics are
used, so scores are stable under incremental updates.

Tombstones are retained forever; their keys leave the inverted index but
stay in the store so last-write-wins reconciliation keeps working.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from datetime import datetime
from pathlib import Path
from typing import Iterable, Optional

from .codecs import RecordHeader
from .datestamp import render_datestamp
from .dc import Element, MetadataRecord, fingerprint, tokenize
from .journal import Journal
from .jsonio import record_from_json, record_to_json
from .query import And, Clause, Not, Or, Phrase, QueryNode, Term, eval_query, parse_query

__all__ = ["IndexedEntry", "UnionIndex", "FIELD_WEIGHTS", "score_record"]

FIELD_WEIGHTS = {Element.TITLE: 3, Element.CREATOR: 2, Element.SUBJECT: 2}
DEFAULT_WEIGHT = 1


def field_weight(element: Element) -> int:
    return FIELD_WEIGHTS.get(element, DEFAULT_WEIGHT)


@dataclass(frozen=True)
class IndexedEntry:
    provider_id: str
    header: RecordHeader
    record: Optional[MetadataRecord] = None

    def __post_init__(self):
        if self.header.deleted and self.record is not None:
            raise ValueError("deleted entry must not carry a record")
        if not self.header.deleted and self.record is None:
            raise ValueError("live entry must carry a record")

    @property
    def key(self) -> tuple[str, str]:
        return (self.provider_id, self.header.identifier)

    @property
    def fingerprint(self) -> str:
        return fingerprint(self.record) if self.record is not None else ""


def _match_count(tokens: list[str], match) -> int:
    if isinstance(match, Term):
        return tokens.count(match.token)
    needle = list(match.tokens)
    width = len(needle)
    return sum(1 for i in range(len(tokens) - width + 1) if tokens[i : i + width] == needle)


def _clause_score(clause: Clause, record: MetadataRecord) -> int:
    per_field: dict[Element, int] = {}
    for statement in record.statements:
        if clause.field is not None and statement.element is not clause.field:
            continue
        count = _match_count(tokenize(statement.value), clause.match)
        if count:
            per_field[statement.element] = per_field.get(statement.element, 0) + count
    if not per_field:
        return 0
    scores = [field_weight(e) * tf for e, tf in per_field.items()]
    return max(scores) if clause.field is None else sum(scores)


def score_record(node: QueryNode, record: MetadataRecord) -> int:
    """Sum of contributions of the distinct clauses that match the record."""
    from .query import clauses_of

    return sum(_clause_score(c, record) for c in clauses_of(node))


class UnionIndex:
    """Single-writer store with snapshot-consistent concurrent readers."""

    def __init__(self, data_dir: str | Path, fsync: bool = False):
        self._lock = threading.RLock()
        self._entries: dict[tuple[str, str], IndexedEntry] = {}
        # (element, token) -> {entry key: term frequency}
        self._postings: dict[tuple[Element, str], dict[tuple[str, str], int]] = {}
        self._journal = Journal(data_dir, fsync=fsync)
        self._recover()

    @classmethod
    def open(cls, data_dir: str | Path, fsync: bool = False):
        return cls(data_dir, fsync=fsync)

    # --- persistence ------------------------------------------------------

    def _recover(self) -> None:
        state, tail = self._journal.recover()
        if state is not None:
            for body in state["entries"]:
                entry = self._entry_from_json(body)
                self._entries[entry.key] = entry
        for op in tail:
            entry = self._entry_from_json(op["entry"])
            self._entries[entry.key] = entry
        self.rebuild()

    @staticmethod
    def _entry_to_json(entry: IndexedEntry) -> dict:
        body = {
            "provider": entry.provider_id,
            "identifier": entry.header.identifier,
            "datestamp": render_datestamp(entry.header.datestamp),
            "deleted": entry.header.deleted,
        }
        if entry.record is not None:
            body["metadata"] = record_to_json(entry.record)
        return body

    @staticmethod
    def _entry_from_json(body: dict) -> IndexedEntry:
        from .datestamp import parse_datestamp

        header = RecordHeader(
            body["identifier"], parse_datestamp(body["datestamp"]), deleted=bool(body["deleted"])
        )
        record = record_from_json(body["metadata"]) if "metadata" in body else None
        return IndexedEntry(body["provider"], header, record)

    def write_snapshot(self) -> None:
        with self._lock:
            state = {
                "entries": [self._entry_to_json(e) for e in sorted(self._entries.values(), key=lambda e: e.key)]
            }
            self._journal.write_snapshot(state)

    def close(self) -> None:
        with self._lock:
            self.write_snapshot()
            self._journal.close()

    @property
    def directory(self) -> Path:
        return self._journal.directory

    # --- writes -------------------------------------------------------------

    def _unindex(self, key: tuple[str, str]) -> None:
        previous = self._entries.get(key)
        if previous is None or previous.record is None:
            return
        for statement in previous.record.statements:
            for token in set(tokenize(statement.value)):
                posting = self._postings.get((statement.element, token))
                if posting is not None:
                    posting.pop(key, None)
                    if not posting:
                        del self._postings[(statement.element, token)]

    def _index(self, entry: IndexedEntry) -> None:
        if entry.record is None:
            return
        for statement in entry.record.statements:
            for token in tokenize(statement.value):
                posting = self._postings.setdefault((statement.element, token), {})
                posting[entry.key] = posting.get(entry.key, 0) + 1

    def upsert(self, entry: IndexedEntry) -> None:
        with self._lock:
            self._journal.append({"op": "upsert", "entry": self._entry_to_json(entry)})
            self._unindex(entry.key)
            self._entries[entry.key] = entry
            self._index(entry)

    def mark_deleted(self, provider_id: str, identifier: str, datestamp: datetime) -> None:
        entry = IndexedEntry(
            provider_id, RecordHeader(identifier, datestamp, deleted=True)
        )
        with self._lock:
            self._journal.append({"op": "delete", "entry": self._entry_to_json(entry)})
            self._unindex(entry.key)
            self._entries[entry.key] = entry

    def rebuild(self) -> None:
        """Reconstruct the inverted index from the store."""
        with self._lock:
            self._postings = {}
            for entry in self._entries.values():
                if not entry.header.deleted:
                    self._index(entry)

    # --- reads --------------------------------------------------------------

    def get(self, provider_id: str, identifier: str) -> Optional[IndexedEntry]:
        with self._lock:
            return self._entries.get((provider_id, identifier))

    def entries(self) -> list[IndexedEntry]:
        with self._lock:
            return list(self._entries.values())

    def live_entries(self) -> list[IndexedEntry]:
        with self._lock:
            return [e for e in self._entries.values() if not e.header.deleted]

    def __len__(self) -> int:
        with self._lock:
            return len(self._entries)

    def _candidate_keys(self, node: QueryNode) -> Optional[set[tuple[str, str]]]:
        """Superset of matching keys from the postings, or None when the
        node can match records the postings cannot enumerate (negation)."""
        if isinstance(node, Clause):
            tokens = [node.match.token] if isinstance(node.match, Term) else list(node.match.tokens)
            acc: Optional[set[tuple[str, str]]] = None
            for token in tokens:
                if node.field is None:
                    keys = set()
                    for (_, posted_token), posting in self._postings.items():
                        if posted_token == token:
                            keys.update(posting)
                else:
                    keys = set(self._postings.get((node.field, token), ()))
                acc = keys if acc is None else acc & keys
            return acc if acc is not None else set()
        if isinstance(node, And):
            left = self._candidate_keys(node.left)
            right = self._candidate_keys(node.right)
            if left is None:
                return right
            if right is None:
                return left
            return left & right
        if isinstance(node, Or):
            left = self._candidate_keys(node.left)
            right = self._candidate_keys(node.right)
            if left is None or right is None:
                return None
            return left | right
        if isinstance(node, Not):
            return None
        raise TypeError(f"not a query node: {node!r}")

    def query(
        self, query_text: str, start: int = 0, max_results: int = 10
    ) -> tuple[int, list[tuple[str, str, int, MetadataRecord]]]:
        """Ranked live matches: (total, [(provider, identifier, score,
        record)]) ordered score desc, datestamp desc, identifier asc."""
        if max_results < 1:
            raise ValueError("max_results must be >= 1")
        node = parse_query(query_text)
        with self._lock:
            keys = self._candidate_keys(node)
            if keys is None:
                candidates = [e for e in self._entries.values() if not e.header.deleted]
            else:
                candidates = [
                    e
                    for key in keys
                    if (e := self._entries.get(key)) is not None and not e.header.deleted
                ]
            matches = [
                (e, score_record(node, e.record))
                for e in candidates
                if e.record is not None and eval_query(node, e.record)
            ]
        matches.sort(key=lambda pair: (pair[0].header.identifier, pair[0].provider_id))
        matches.sort(key=lambda pair: pair[0].header.datestamp, reverse=True)
        matches.sort(key=lambda pair: pair[1], reverse=True)
        window = matches[start : start + max_results]
        return (
            len(matches),
            [(e.provider_id, e.header.identifier, score, e.record) for e, score in window],
        )
