"""The harvest protocol: four verbs over a repository snapshot, selective
datestamp ranges with inclusive bounds, deterministic paging through
stateless resumption tokens, deletion propagation and a closed error
vocabulary.

``handle_request`` is a pure function of (snapshot, repository info,
request, now): identical inputs produce byte-identical XML responses.
Transport is HTTP GET ``/oai?verb=...``; the envelope is::

    <repository-response respondedAt="...">
      <request verb="..." .../>
      <error code="..."/> | <identify>...</identify> | <records>...</records>
    </repository-response>

``records`` holds ``record`` children for ListRecords/GetRecord and bare
``header`` children for ListIdentifiers, with a trailing
``resumptionToken`` element whenever a further page exists.
"""

from __future__ import annotations

import base64
import binascii
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from datetime import datetime
from typing import Optional, Sequence

from . import codecs
from .codecs import RecordHeader, WireRecord
from .datestamp import DatestampError, parse_datestamp, render_datestamp, shift

__all__ = [
    "VERBS",
    "ERROR_CODES",
    "TOKEN_TTL_SECONDS",
    "RepositoryInfo",
    "HarvestRequest",
    "TokenError",
    "mint_token",
    "parse_token",
    "select_page",
    "handle_request",
    "error_response",
    "HarvestResponse",
    "parse_harvest_response",
    "HarvestResponseError",
]

VERBS = ("Identify", "ListRecords", "ListIdentifiers", "GetRecord")
ERROR_CODES = (
    "badVerb",
    "badArgument",
    "badResumptionToken",
    "idDoesNotExist",
    "noRecordsMatch",
)
TOKEN_TTL_SECONDS = 3600
EPOCH_STAMP = "1970-01-01T00:00:00Z"


@dataclass(frozen=True)
class RepositoryInfo:
    repository_id: str
    display_name: str
    admin_contact: str
    page_size: int = 100


@dataclass(frozen=True)
class HarvestRequest:
    verb: str
    identifier: Optional[str] = None
    from_: Optional[datetime] = None
    until: Optional[datetime] = None
    resumption_token: Optional[str] = None


class TokenError(ValueError):
    pass


@dataclass(frozen=True)
class TokenContent:
    cursor: int
    from_: Optional[datetime]
    until: Optional[datetime]
    issued_at: datetime


def mint_token(
    cursor: int, from_: Optional[datetime], until: Optional[datetime], now: datetime
) -> str:
    """Self-describing continuation; servers keep no session state. Opaque
    to clients, expires one hour after issue."""
    fields = [
        "v1",
        str(cursor),
        render_datestamp(from_) if from_ else "",
        render_datestamp(until) if until else "",
        render_datestamp(now),
    ]
    return base64.urlsafe_b64encode("|".join(fields).encode("ascii")).decode("ascii")


def parse_token(text: str, now: datetime) -> TokenContent:
    try:
        decoded = base64.urlsafe_b64decode(text.encode("ascii")).decode("ascii")
    except (binascii.Error, UnicodeError, ValueError):
        raise TokenError("resumption token is not decodable") from None
    fields = decoded.split("|")
    if len(fields) != 5 or fields[0] != "v1":
        raise TokenError("resumption token has an unknown layout")
    try:
        cursor = int(fields[1])
        from_ = parse_datestamp(fields[2]) if fields[2] else None
        until = parse_datestamp(fields[3]) if fields[3] else None
        issued_at = parse_datestamp(fields[4])
    except (ValueError, DatestampError):
        raise TokenError("resumption token has malformed fields") from None
    if cursor < 0:
        raise TokenError("resumption token has a negative cursor")
    if now > shift(issued_at, TOKEN_TTL_SECONDS):
        raise TokenError("resumption token has expired")
    return TokenContent(cursor, from_, until, issued_at)


def _selection(
    snapshot: Sequence[WireRecord],
    from_: Optional[datetime],
    until: Optional[datetime],
) -> list[WireRecord]:
    chosen = [
        wire
        for wire in snapshot
        if (from_ is None or wire.header.datestamp >= from_)
        and (until is None or wire.header.datestamp <= until)
    ]
    chosen.sort(key=lambda w: (w.header.datestamp, w.header.identifier))
    return chosen


def select_page(
    snapshot: Sequence[WireRecord],
    from_: Optional[datetime],
    until: Optional[datetime],
    cursor: int,
    page_size: int,
    now: datetime,
) -> tuple[list[WireRecord], Optional[str], int]:
    """One page of the datestamp-ordered selection (deleted headers
    included), plus a continuation token when records remain."""
    if page_size < 1:
        raise ValueError("page_size must be >= 1")
    if cursor < 0:
        raise ValueError("cursor must be >= 0")
    selection = _selection(snapshot, from_, until)
    page = selection[cursor : cursor + page_size]
    next_cursor = cursor + page_size
    token = None
    if next_cursor < len(selection):
        token = mint_token(next_cursor, from_, until, now)
    return page, token, len(selection)


def _attr(s: str) -> str:
    return (
        s.replace("&", "&amp;")
        .replace("<", "&lt;")
        .replace(">", "&gt;")
        .replace('"', "&quot;")
    )


def _request_echo(request: HarvestRequest) -> str:
    attrs = [f'verb="{_attr(request.verb)}"']
    if request.identifier is not None:
        attrs.append(f'identifier="{_attr(request.identifier)}"')
    if request.from_ is not None:
        attrs.append(f'from="{render_datestamp(request.from_)}"')
    if request.until is not None:
        attrs.append(f'until="{render_datestamp(request.until)}"')
    if request.resumption_token is not None:
        attrs.append(f'resumptionToken="{_attr(request.resumption_token)}"')
    return f"<request {' '.join(attrs)}/>"


def _envelope(request: HarvestRequest, now: datetime, payload: str) -> bytes:
    return (
        f'<repository-response respondedAt="{render_datestamp(now)}">'
        f"{_request_echo(request)}{payload}</repository-response>"
    ).encode("utf-8")


def error_response(request: HarvestRequest, now: datetime, code: str, message: str) -> bytes:
    return _envelope(request, now, f'<error code="{code}">{_attr(message)}</error>')


def _header_xml(header: RecordHeader) -> str:
    status = ' status="deleted"' if header.deleted else ""
    return (
        f"<header{status}><identifier>{_attr(header.identifier)}</identifier>"
        f"<datestamp>{render_datestamp(header.datestamp)}</datestamp></header>"
    )


def _records_payload(
    page: Sequence[WireRecord],
    token: Optional[str],
    complete_size: int,
    cursor: int,
    headers_only: bool,
) -> str:
    if headers_only:
        body = "".join(_header_xml(w.header) for w in page)
    else:
        body = "".join(codecs.encode_record_xml(w).decode("utf-8") for w in page)
    if token is not None:
        body += (
            f'<resumptionToken completeListSize="{complete_size}" '
            f'cursor="{cursor}">{token}</resumptionToken>'
        )
    return f"<records>{body}</records>"


def handle_request(
    snapshot: Sequence[WireRecord],
    info: RepositoryInfo,
    request: HarvestRequest,
    now: datetime,
) -> bytes:
    """Answer one harvest request against a consistent snapshot."""
    if request.verb not in VERBS:
        return error_response(request, now, "badVerb", f"unknown verb {request.verb!r}")

    extra_args = []
    if request.verb != "GetRecord" and request.identifier is not None:
        extra_args.append("identifier")
    if request.verb in ("Identify", "GetRecord"):
        if request.from_ is not None:
            extra_args.append("from")
        if request.until is not None:
            extra_args.append("until")
        if request.resumption_token is not None:
            extra_args.append("resumptionToken")
    if extra_args:
        return error_response(
            request, now, "badArgument", f"arguments not allowed: {', '.join(extra_args)}"
        )

    if request.verb == "Identify":
        stamps = [w.header.datestamp for w in snapshot]
        earliest = render_datestamp(min(stamps)) if stamps else EPOCH_STAMP
        payload = (
            "<identify>"
            f"<repositoryName>{_attr(info.display_name)}</repositoryName>"
            f"<repositoryId>{_attr(info.repository_id)}</repositoryId>"
            f"<adminContact>{_attr(info.admin_contact)}</adminContact>"
            f"<earliestDatestamp>{earliest}</earliestDatestamp>"
            "</identify>"
        )
        return _envelope(request, now, payload)

    if request.verb == "GetRecord":
        if not request.identifier:
            return error_response(request, now, "badArgument", "GetRecord requires identifier")
        for wire in snapshot:
            if wire.header.identifier == request.identifier:
                payload = (
                    "<records>" + codecs.encode_record_xml(wire).decode("utf-8") + "</records>"
                )
                return _envelope(request, now, payload)
        return error_response(request, now, "idDoesNotExist", request.identifier)

    # ListRecords / ListIdentifiers
    if request.resumption_token is not None:
        if request.from_ is not None or request.until is not None:
            return error_response(
                request, now, "badArgument", "resumptionToken excludes from/until"
            )
        try:
            token = parse_token(request.resumption_token, now)
        except TokenError as exc:
            return error_response(request, now, "badResumptionToken", str(exc))
        cursor, from_, until = token.cursor, token.from_, token.until
    else:
        cursor, from_, until = 0, request.from_, request.until
        if from_ is not None and until is not None and from_ > until:
            return error_response(request, now, "badArgument", "from is later than until")

    page, next_token, complete_size = select_page(
        snapshot, from_, until, cursor, info.page_size, now
    )
    if complete_size == 0:
        return error_response(request, now, "noRecordsMatch", "selection is empty")
    if not page:
        # a stale cursor past the end of a shrunken selection
        return error_response(request, now, "badResumptionToken", "cursor is out of range")
    payload = _records_payload(
        page,
        next_token,
        complete_size,
        cursor,
        headers_only=request.verb == "ListIdentifiers",
    )
    return _envelope(request, now, payload)


# --- client-side envelope parsing ---------------------------------------


class HarvestResponseError(ValueError):
    pass


@dataclass(frozen=True)
class HarvestResponse:
    responded_at: datetime
    error_code: Optional[str] = None
    error_message: Optional[str] = None
    records: tuple[WireRecord, ...] = ()
    headers: tuple[RecordHeader, ...] = ()
    resumption_token: Optional[str] = None
    complete_list_size: Optional[int] = None
    identify: dict = field(default_factory=dict)


def parse_harvest_response(data: bytes) -> HarvestResponse:
    try:
        root = ET.fromstring(data)
    except ET.ParseError as exc:
        raise HarvestResponseError(f"malformed response XML: {exc}") from None
    if root.tag != "repository-response":
        raise HarvestResponseError(f"unexpected root element <{root.tag}>")
    try:
        responded_at = parse_datestamp(root.attrib.get("respondedAt", ""))
    except DatestampError as exc:
        raise HarvestResponseError(str(exc)) from None

    error_node = root.find("error")
    if error_node is not None:
        code = error_node.attrib.get("code", "")
        if code not in ERROR_CODES:
            raise HarvestResponseError(f"unknown error code {code!r}")
        return HarvestResponse(responded_at, error_code=code, error_message=error_node.text)

    identify_node = root.find("identify")
    if identify_node is not None:
        details = {child.tag: child.text or "" for child in identify_node}
        return HarvestResponse(responded_at, identify=details)

    records_node = root.find("records")
    if records_node is None:
        raise HarvestResponseError("response carries no payload")
    records: list[WireRecord] = []
    headers: list[RecordHeader] = []
    token = None
    size = None
    try:
        for child in records_node:
            if child.tag == "record":
                records.append(codecs.record_from_xml_element(child))
            elif child.tag == "header":
                headers.append(codecs.header_from_xml(child))
            elif child.tag == "resumptionToken":
                token = (child.text or "").strip() or None
                if "completeListSize" in child.attrib:
                    size = int(child.attrib["completeListSize"])
            else:
                raise HarvestResponseError(f"unexpected element <{child.tag}>")
    except (codecs.RecordDecodeError, ValueError) as exc:
        raise HarvestResponseError(str(exc)) from None
    return HarvestResponse(
        responded_at,
        records=tuple(records),
        headers=tuple(headers),
        resumption_token=token,
        complete_list_size=size,
    )
