"""Dublin Core record model: elements, statements, document profiles,
text normalization and the deduplication fingerprint.

Everything here is an immutable value; all functions are pure.
"""

from __future__ import annotations

import re
import unicodedata
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Optional

__all__ = [
    "Element",
    "Statement",
    "MetadataRecord",
    "DocumentProfile",
    "PROFILES",
    "DOCUMENT_KINDS",
    "normalize_text",
    "tokenize",
    "fingerprint",
    "validate_record",
]


class Element(str, Enum):
    """The fifteen descriptive elements. No other element is constructible;
    lookup is case-insensitive, the canonical form is lowercase."""

    TITLE = "title"
    CREATOR = "creator"
    SUBJECT = "subject"
    DESCRIPTION = "description"
    PUBLISHER = "publisher"
    CONTRIBUTOR = "contributor"
    DATE = "date"
    TYPE = "type"
    FORMAT = "format"
    IDENTIFIER = "identifier"
    SOURCE = "source"
    LANGUAGE = "language"
    RELATION = "relation"
    COVERAGE = "coverage"
    RIGHTS = "rights"

    @classmethod
    def _missing_(cls, value):
        if isinstance(value, str):
            lowered = value.lower()
            for member in cls:
                if member.value == lowered:
                    return member
        return None

    def __str__(self) -> str:
        return self.value


_TOKEN_RE = re.compile(r"^[A-Za-z0-9-]+$")
_LANGUAGE_RE = re.compile(r"^[A-Za-z-]{2,8}$")


@dataclass(frozen=True)
class Statement:
    """One descriptive assertion about a document.

    Construction is permissive so that invalid statements can be built and
    then reported by ``validate_record``; ``violations()`` lists any rule
    the statement breaks.
    """

    element: Element
    value: str
    qualifier: Optional[str] = None
    scheme: Optional[str] = None
    language: Optional[str] = None

    def __post_init__(self):
        object.__setattr__(self, "element", Element(self.element))

    def violations(self) -> list[str]:
        problems = []
        if not self.value or not self.value.strip():
            problems.append(f"statement {self.element}: value is empty")
        if self.qualifier is not None and not _TOKEN_RE.match(self.qualifier):
            problems.append(
                f"statement {self.element}: qualifier {self.qualifier!r} is not a token"
            )
        if self.scheme is not None and not _TOKEN_RE.match(self.scheme):
            problems.append(
                f"statement {self.element}: scheme {self.scheme!r} is not a token"
            )
        if self.language is not None and not _LANGUAGE_RE.match(self.language):
            problems.append(
                f"statement {self.element}: language tag {self.language!r} is malformed"
            )
        return problems


@dataclass(frozen=True)
class MetadataRecord:
    """An ordered list of statements. Every element is optional and
    repeatable; statement order is significant and preserved everywhere."""

    statements: tuple[Statement, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "statements", tuple(self.statements))

    def values(self, element: Element) -> list[str]:
        element = Element(element)
        return [s.value for s in self.statements if s.element is element]

    def first(self, element: Element) -> Optional[str]:
        values = self.values(element)
        return values[0] if values else None


@dataclass(frozen=True)
class DocumentProfile:
    """Per-kind submission requirements: pairs of (element, qualifier).

    A requirement with qualifier ``None`` is satisfied by any statement of
    that element; a named qualifier must match exactly.
    """

    kind: str
    required: tuple[tuple[Element, Optional[str]], ...]


_BASE_REQUIRED = (
    (Element.TITLE, None),
    (Element.IDENTIFIER, None),
    (Element.DATE, None),
)

PROFILES: dict[str, DocumentProfile] = {
    "thesis": DocumentProfile(
        "thesis",
        _BASE_REQUIRED
        + (
            (Element.DESCRIPTION, "degree-name"),
            (Element.DESCRIPTION, "degree-level"),
            (Element.DESCRIPTION, "degree-grantor"),
        ),
    ),
    "journal-article": DocumentProfile(
        "journal-article",
        _BASE_REQUIRED + ((Element.RELATION, "citation"),),
    ),
    "conference-paper": DocumentProfile(
        "conference-paper",
        _BASE_REQUIRED
        + (
            (Element.RELATION, "conference-name"),
            (Element.DATE, "conference-date"),
        ),
    ),
    "research-report": DocumentProfile(
        "research-report",
        _BASE_REQUIRED
        + (
            (Element.PUBLISHER, None),
            (Element.IDENTIFIER, "report-number"),
        ),
    ),
    "generic": DocumentProfile("generic", _BASE_REQUIRED),
}

DOCUMENT_KINDS = tuple(PROFILES)


def validate_record(record: MetadataRecord, profile: DocumentProfile) -> list[str]:
    """Check a record against a profile. Returns violation descriptions;
    empty list means the record is acceptable. Unknown qualifiers are never
    rejected, only the profile-required pairs are checked."""
    violations = []
    for statement in record.statements:
        violations.extend(statement.violations())
    for element, qualifier in profile.required:
        if qualifier is None:
            ok = any(s.element is element for s in record.statements)
        else:
            ok = any(
                s.element is element and s.qualifier == qualifier
                for s in record.statements
            )
        if not ok:
            where = f"{element}" if qualifier is None else f"{element} (qualifier {qualifier})"
            violations.append(f"missing required statement: {where}")
    return violations


def normalize_text(s: str) -> str:
    """Lowercase, diacritic-free, punctuation-free canonical form.

    Canonical decomposition followed by combining-mark removal, then
    lowercasing, punctuation replaced by spaces, and whitespace runs
    collapsed. Idempotent.
    """
    decomposed = unicodedata.normalize("NFD", s)
    stripped = "".join(c for c in decomposed if unicodedata.category(c) != "Mn")
    lowered = stripped.lower()
    spaced = "".join(c if c.isalnum() or c.isspace() else " " for c in lowered)
    return " ".join(spaced.split())


def tokenize(s: str) -> list[str]:
    """Normalized word list used for all matching and indexing."""
    normalized = normalize_text(s)
    return normalized.split(" ") if normalized else []


_YEAR_RE = re.compile(r"^\s*(\d{4})")


def _year_of(record: MetadataRecord) -> str:
    for value in record.values(Element.DATE):
        match = _YEAR_RE.match(value)
        if match:
            return match.group(1)
    return "----"


def fingerprint(record: MetadataRecord) -> str:
    """Deduplication key: normalized title, sorted normalized creators and a
    four-digit year. Insensitive to statement order and to whitespace,
    punctuation or diacritic variation in title and creators."""
    title = record.first(Element.TITLE) or ""
    creators = sorted(normalize_text(c) for c in record.values(Element.CREATOR))
    return "|".join([normalize_text(title), ";".join(creators), _year_of(record)])


def record_from_pairs(pairs: Iterable[tuple[str, str]]) -> MetadataRecord:
    """Convenience constructor from (element, value) pairs."""
    return MetadataRecord(tuple(Statement(Element(e), v) for e, v in pairs))
