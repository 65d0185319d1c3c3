"""UTC datestamps at second granularity, rendered ``YYYY-MM-DDThh:mm:ssZ``.

Parse and render round-trip exactly; ordering of rendered strings matches
ordering of instants, so datestamps can be compared either way.
"""

from __future__ import annotations

import re
from datetime import datetime, timedelta, timezone

__all__ = ["DatestampError", "parse_datestamp", "render_datestamp", "utcnow", "shift"]

_STAMP_RE = re.compile(r"^\d{4}-\d{2}-\d{2}T\d{2}:\d{2}:\d{2}Z$")


class DatestampError(ValueError):
    pass


def parse_datestamp(text: str) -> datetime:
    if not _STAMP_RE.match(text):
        raise DatestampError(f"malformed datestamp: {text!r}")
    try:
        parsed = datetime.strptime(text, "%Y-%m-%dT%H:%M:%SZ")
    except ValueError:
        raise DatestampError(f"malformed datestamp: {text!r}") from None
    return parsed.replace(tzinfo=timezone.utc)


def render_datestamp(instant: datetime) -> str:
    if instant.tzinfo is None:
        instant = instant.replace(tzinfo=timezone.utc)
    return instant.astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def utcnow() -> datetime:
    return datetime.now(timezone.utc).replace(microsecond=0)


def shift(instant: datetime, seconds: int) -> datetime:
    return instant + timedelta(seconds=seconds)
