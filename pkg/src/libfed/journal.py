"""Crash-safe persistence: one append-only JSON-lines operations log plus
an atomic snapshot written temp-file-then-rename.

Recovery loads the snapshot (if any) and replays log entries with a higher
sequence number. A torn final line — the signature of a crash mid-append —
is ignored; corruption anywhere else is an error. Appends are flushed to
the OS on every call so a killed process loses at most the entry it was
writing.
"""

from __future__ import annotations

import json
import os
from pathlib import Path
from typing import Any, Iterator, Optional

__all__ = ["Journal", "JournalCorrupt"]

LOG_NAME = "ops.log"
SNAPSHOT_NAME = "snapshot.json"


class JournalCorrupt(RuntimeError):
    pass


class Journal:
    def __init__(self, directory: str | os.PathLike, fsync: bool = False):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)
        self.log_path = self.directory / LOG_NAME
        self.snapshot_path = self.directory / SNAPSHOT_NAME
        self.fsync = fsync
        self._seq = self._last_seq()
        self._log_file = open(self.log_path, "a", encoding="utf-8")

    def _last_seq(self) -> int:
        last = self._snapshot_seq()
        for seq, _ in self._log_entries():
            last = max(last, seq)
        return last

    def _snapshot_seq(self) -> int:
        snapshot = self.load_snapshot()
        return snapshot[0] if snapshot else 0

    def append(self, entry: dict[str, Any]) -> int:
        """Durably record one operation; returns its sequence number."""
        self._seq += 1
        line = json.dumps({"seq": self._seq, **entry}, ensure_ascii=False, sort_keys=True)
        self._log_file.write(line + "\n")
        self._log_file.flush()
        if self.fsync:
            os.fsync(self._log_file.fileno())
        return self._seq

    def _log_entries(self) -> Iterator[tuple[int, dict[str, Any]]]:
        if not self.log_path.exists():
            return
        with open(self.log_path, "rb") as handle:
            raw = handle.read()
        lines = raw.split(b"\n")
        # entries are newline-terminated, so whatever trails the last
        # newline is a torn final append and is dropped
        for index, line in enumerate(lines[:-1]):
            if not line.strip():
                continue
            try:
                entry = json.loads(line.decode("utf-8"))
                seq = int(entry.pop("seq"))
            except (ValueError, KeyError, UnicodeDecodeError):
                raise JournalCorrupt(f"unreadable log line {index + 1} in {self.log_path}")
            yield seq, entry

    def load_snapshot(self) -> Optional[tuple[int, Any]]:
        if not self.snapshot_path.exists():
            return None
        try:
            with open(self.snapshot_path, "r", encoding="utf-8") as handle:
                document = json.load(handle)
            return int(document["seq"]), document["state"]
        except (ValueError, KeyError) as exc:
            raise JournalCorrupt(f"unreadable snapshot {self.snapshot_path}: {exc}")

    def recover(self) -> tuple[Optional[Any], list[dict[str, Any]]]:
        """Snapshot state (or None) plus the log tail to replay, in order."""
        snapshot = self.load_snapshot()
        state = snapshot[1] if snapshot else None
        floor = snapshot[0] if snapshot else 0
        tail = [entry for seq, entry in self._log_entries() if seq > floor]
        return state, tail

    def write_snapshot(self, state: Any) -> None:
        """Atomically replace the snapshot with the current state."""
        temp_path = self.snapshot_path.with_suffix(".tmp")
        with open(temp_path, "w", encoding="utf-8") as handle:
            json.dump({"seq": self._seq, "state": state}, handle, ensure_ascii=False)
            handle.flush()
            os.fsync(handle.fileno())
        os.replace(temp_path, self.snapshot_path)

    def close(self) -> None:
        if not self._log_file.closed:
            self._log_file.flush()
            self._log_file.close()
