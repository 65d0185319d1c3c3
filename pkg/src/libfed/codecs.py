"""Codecs between metadata records and their three carriers: the harvest
record XML, Dublin Core in HTML ``meta`` elements, and tagged text files.

The XML encoder is byte-deterministic: no declaration, no whitespace, fixed
attribute order, the five standard character entities and nothing else.
Decoders are total: they raise ``RecordDecodeError`` (or return warnings)
but never crash on arbitrary bytes.
"""

from __future__ import annotations

import hashlib
import re
import xml.etree.ElementTree as ET
from dataclasses import dataclass
from datetime import datetime
from html.parser import HTMLParser
from typing import Optional

from .datestamp import DatestampError, parse_datestamp, render_datestamp
from .dc import Element, MetadataRecord, Statement

__all__ = [
    "RecordHeader",
    "WireRecord",
    "RecordDecodeError",
    "encode_record_xml",
    "decode_record_xml",
    "encode_dc_fragment",
    "record_digest",
    "extract_dc_from_html",
    "parse_tagged_text",
]

_OAI_IDENTIFIER_RE = re.compile(r"^oai:[^:]+:[^:]+$")


@dataclass(frozen=True)
class RecordHeader:
    """Provider-scoped identifier, last-touched datestamp, deletion flag.

    Provider-minted identifiers follow ``oai:<repositoryId>:<localId>``
    (checked by ``is_oai_identifier``); file-ingested entries use the raw
    identifier value or a content-hash key instead.
    """

    identifier: str
    datestamp: datetime
    deleted: bool = False

    @staticmethod
    def is_oai_identifier(identifier: str) -> bool:
        return bool(_OAI_IDENTIFIER_RE.match(identifier))


@dataclass(frozen=True)
class WireRecord:
    """Header plus metadata; deleted records carry the header only."""

    header: RecordHeader
    record: Optional[MetadataRecord] = None

    def __post_init__(self):
        if self.header.deleted and self.record is not None:
            raise ValueError("deleted record must not carry metadata")
        if not self.header.deleted and self.record is None:
            raise ValueError("live record must carry metadata")


class RecordDecodeError(ValueError):
    pass


def _escape_text(s: str) -> str:
    return s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def _escape_attr(s: str) -> str:
    return (
        s.replace("&", "&amp;")
        .replace("<", "&lt;")
        .replace(">", "&gt;")
        .replace('"', "&quot;")
        .replace("'", "&apos;")
    )


def _statement_xml(statement: Statement) -> str:
    attrs = ""
    if statement.qualifier is not None:
        attrs += f' qualifier="{_escape_attr(statement.qualifier)}"'
    if statement.scheme is not None:
        attrs += f' scheme="{_escape_attr(statement.scheme)}"'
    if statement.language is not None:
        attrs += f' lang="{_escape_attr(statement.language)}"'
    name = statement.element.value
    return f"<{name}{attrs}>{_escape_text(statement.value)}</{name}>"


def encode_dc_fragment(record: MetadataRecord) -> bytes:
    """The ``<dc>`` element alone; also the canonical form hashed for
    content-addressed identifiers."""
    body = "".join(_statement_xml(s) for s in record.statements)
    return f"<dc>{body}</dc>".encode("utf-8")


def record_digest(record: MetadataRecord) -> str:
    """First 16 hex digits of a digest of the canonical record encoding."""
    return hashlib.sha256(encode_dc_fragment(record)).hexdigest()[:16]


def encode_record_xml(wire: WireRecord) -> bytes:
    header = wire.header
    status = ' status="deleted"' if header.deleted else ""
    parts = [
        "<record>",
        f"<header{status}>",
        f"<identifier>{_escape_text(header.identifier)}</identifier>",
        f"<datestamp>{render_datestamp(header.datestamp)}</datestamp>",
        "</header>",
    ]
    if wire.record is not None:
        parts.append("<metadata>")
        parts.append(encode_dc_fragment(wire.record).decode("utf-8"))
        parts.append("</metadata>")
    parts.append("</record>")
    return "".join(parts).encode("utf-8")


def _statement_from_element(node: ET.Element) -> Statement:
    tag = node.tag
    try:
        element = Element(tag)
    except ValueError:
        raise RecordDecodeError(f"unknown element name: {tag!r}") from None
    allowed = {"qualifier", "scheme", "lang"}
    unknown = set(node.attrib) - allowed
    if unknown:
        raise RecordDecodeError(f"unknown attribute on <{tag}>: {sorted(unknown)}")
    if len(node) > 0:
        raise RecordDecodeError(f"<{tag}> must not contain child elements")
    value = node.text or ""
    if not value.strip():
        raise RecordDecodeError(f"<{tag}> has an empty value")
    return Statement(
        element,
        value,
        qualifier=node.attrib.get("qualifier"),
        scheme=node.attrib.get("scheme"),
        language=node.attrib.get("lang"),
    )


def header_from_xml(node: ET.Element) -> RecordHeader:
    status = node.attrib.get("status")
    if set(node.attrib) - {"status"}:
        raise RecordDecodeError("unknown attribute on <header>")
    if status not in (None, "deleted"):
        raise RecordDecodeError(f"unknown header status: {status!r}")
    identifier_node = node.find("identifier")
    datestamp_node = node.find("datestamp")
    if identifier_node is None or not (identifier_node.text or "").strip():
        raise RecordDecodeError("missing identifier")
    if datestamp_node is None or not (datestamp_node.text or "").strip():
        raise RecordDecodeError("missing datestamp")
    try:
        datestamp = parse_datestamp(datestamp_node.text.strip())
    except DatestampError as exc:
        raise RecordDecodeError(str(exc)) from None
    return RecordHeader(identifier_node.text.strip(), datestamp, deleted=status == "deleted")


def record_from_xml_element(node: ET.Element) -> WireRecord:
    if node.tag != "record":
        raise RecordDecodeError(f"expected <record>, found <{node.tag}>")
    header_node = node.find("header")
    if header_node is None:
        raise RecordDecodeError("missing header")
    header = header_from_xml(header_node)
    metadata_node = node.find("metadata")
    if header.deleted:
        if metadata_node is not None:
            raise RecordDecodeError("metadata present on deleted record")
        return WireRecord(header)
    if metadata_node is None:
        raise RecordDecodeError("missing metadata on live record")
    dc_node = metadata_node.find("dc")
    if dc_node is None:
        raise RecordDecodeError("missing dc element")
    statements = tuple(_statement_from_element(child) for child in dc_node)
    return WireRecord(header, MetadataRecord(statements))


def decode_record_xml(data: bytes) -> WireRecord:
    try:
        root = ET.fromstring(data)
    except ET.ParseError as exc:
        raise RecordDecodeError(f"malformed XML: {exc}") from None
    return record_from_xml_element(root)


_DC_NAME_RE = re.compile(r"^dc\.([a-z]+)(?:\.([A-Za-z0-9-]+))?$", re.IGNORECASE)


class _MetaScanner(HTMLParser):
    def __init__(self):
        super().__init__(convert_charrefs=True)
        self.statements: list[Statement] = []
        self.warnings: list[str] = []

    def handle_starttag(self, tag, attrs):
        if tag.lower() != "meta":
            return
        attrmap = {}
        for key, value in attrs:
            if key is not None and key.lower() not in attrmap:
                attrmap[key.lower()] = value
        name = attrmap.get("name") or ""
        match = _DC_NAME_RE.match(name)
        if not match:
            if name.lower().startswith("dc."):
                self.warnings.append(f"skipped meta tag with malformed DC name {name!r}")
            return
        element_name, qualifier = match.group(1), match.group(2)
        try:
            element = Element(element_name)
        except ValueError:
            self.warnings.append(f"skipped meta tag with unknown element {name!r}")
            return
        content = attrmap.get("content")
        if content is None or not content.strip():
            self.warnings.append(f"skipped meta tag {name!r} with empty content")
            return
        self.statements.append(
            Statement(
                element,
                content,
                qualifier=qualifier,
                scheme=attrmap.get("scheme"),
                language=attrmap.get("lang"),
            )
        )

    handle_startendtag = handle_starttag


def extract_dc_from_html(data: bytes) -> tuple[MetadataRecord, list[str]]:
    """Scan ``meta`` tags named ``DC.<element>[.<qualifier>]`` out of an HTML
    document. Tolerant: anything unrecognized is ignored or warned about,
    never fatal."""
    text = data.decode("utf-8", errors="replace")
    scanner = _MetaScanner()
    try:
        scanner.feed(text)
        scanner.close()
    except Exception as exc:  # pragma: no cover - HTMLParser rarely raises
        scanner.warnings.append(f"stopped scanning early: {exc}")
    return MetadataRecord(tuple(scanner.statements)), scanner.warnings


_TAGGED_LINE_RE = re.compile(r"^DC\.([A-Za-z]+)(?:\.([A-Za-z0-9-]+))?:(.*)$", re.IGNORECASE)


def parse_tagged_text(data: bytes) -> list[tuple[MetadataRecord, list[str]]]:
    """Parse the tagged text convention: records separated by blank lines,
    one ``DC.<element>[.<qualifier>]: value`` statement per line, leading
    spaces marking continuation lines."""
    text = data.decode("utf-8", errors="replace")
    results: list[tuple[MetadataRecord, list[str]]] = []
    block: list[str] = []

    def flush():
        if not block:
            return
        statements: list[Statement] = []
        warnings: list[str] = []
        pending: Optional[tuple[Element, Optional[str], str]] = None

        def close_pending():
            nonlocal pending
            if pending is None:
                return
            element, qualifier, value = pending
            pending = None
            if not value.strip():
                warnings.append(f"skipped DC.{element} line with empty value")
                return
            statements.append(Statement(element, value.strip(), qualifier=qualifier))

        for line in block:
            if line[:1] in (" ", "\t") and pending is not None:
                element, qualifier, value = pending
                pending = (element, qualifier, f"{value} {line.strip()}".strip())
                continue
            close_pending()
            match = _TAGGED_LINE_RE.match(line)
            if not match:
                warnings.append(f"skipped unrecognized line {line!r}")
                continue
            element_name, qualifier, value = match.groups()
            try:
                element = Element(element_name)
            except ValueError:
                warnings.append(f"skipped line with unknown element {element_name!r}")
                continue
            pending = (element, qualifier, value.strip())
        close_pending()
        results.append((MetadataRecord(tuple(statements)), warnings))
        block.clear()

    for line in text.splitlines():
        if not line.strip():
            flush()
        else:
            block.append(line)
    flush()
    return results
