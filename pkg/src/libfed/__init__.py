"""libfed: a federated digital-library toolkit.

Two interoperability paths behind one gateway: periodic metadata
harvesting into a centralized union index, and broadcast search across
live providers, with consolidated, deduplicated results — plus the data
provider repository needed to exercise both end to end.
"""

__version__ = "0.1.0"

from .dc import (
    DOCUMENT_KINDS,
    Element,
    MetadataRecord,
    PROFILES,
    Statement,
    fingerprint,
    normalize_text,
    validate_record,
)
from .query import QuerySyntaxError, canonical_text, eval_query, parse_query

__all__ = [
    "__version__",
    "DOCUMENT_KINDS",
    "Element",
    "MetadataRecord",
    "PROFILES",
    "Statement",
    "fingerprint",
    "normalize_text",
    "validate_record",
    "QuerySyntaxError",
    "canonical_text",
    "eval_query",
    "parse_query",
]
