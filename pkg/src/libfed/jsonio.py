"""JSON shapes shared by the search endpoints, the gateway API and the
persisted stores: statements as objects with element/qualifier/scheme/lang/
value fields in an order-preserving array."""

from __future__ import annotations

from typing import Any, Optional

from .codecs import RecordHeader
from .datestamp import parse_datestamp, render_datestamp
from .dc import Element, MetadataRecord, Statement

__all__ = [
    "statement_to_json",
    "statement_from_json",
    "record_to_json",
    "record_from_json",
    "header_to_json",
    "header_from_json",
]


def statement_to_json(statement: Statement) -> dict[str, Any]:
    body: dict[str, Any] = {"element": statement.element.value}
    if statement.qualifier is not None:
        body["qualifier"] = statement.qualifier
    if statement.scheme is not None:
        body["scheme"] = statement.scheme
    if statement.language is not None:
        body["lang"] = statement.language
    body["value"] = statement.value
    return body


def statement_from_json(body: dict[str, Any]) -> Statement:
    return Statement(
        Element(body["element"]),
        body["value"],
        qualifier=body.get("qualifier"),
        scheme=body.get("scheme"),
        language=body.get("lang"),
    )


def record_to_json(record: MetadataRecord) -> list[dict[str, Any]]:
    return [statement_to_json(s) for s in record.statements]


def record_from_json(body: list[dict[str, Any]]) -> MetadataRecord:
    return MetadataRecord(tuple(statement_from_json(s) for s in body))


def header_to_json(header: RecordHeader) -> dict[str, Any]:
    return {
        "identifier": header.identifier,
        "datestamp": render_datestamp(header.datestamp),
        "deleted": header.deleted,
    }


def header_from_json(body: dict[str, Any]) -> RecordHeader:
    return RecordHeader(
        body["identifier"],
        parse_datestamp(body["datestamp"]),
        deleted=bool(body.get("deleted", False)),
    )
