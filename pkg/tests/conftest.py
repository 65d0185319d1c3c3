import random
import string

import pytest

from libfed.codecs import RecordHeader, WireRecord
from libfed.datestamp import parse_datestamp, shift
from libfed.dc import Element, MetadataRecord, Statement

BASE_INSTANT = parse_datestamp("2001-06-01T12:00:00Z")

WORDS = (
    "acervo", "aberto", "redes", "ciência", "informação", "metadados",
    "pesquisa", "são", "paulo", "física", "coração", "ação", "xml",
    "protocolo", "digital", "biblioteca", "publicação", "tecnologia",
)
EXOTIC = ("データ", "архив", "señal", "Ωμέγα", "café", "naïve")


def random_value(rng: random.Random, exotic_chance: float = 0.2) -> str:
    words = rng.sample(WORDS, rng.randint(1, 4))
    if rng.random() < exotic_chance:
        words.append(rng.choice(EXOTIC))
    return " ".join(words)


def random_statement(rng: random.Random) -> Statement:
    element = rng.choice(list(Element))
    qualifier = rng.choice((None, "issued", "degree-level", "report-number"))
    scheme = rng.choice((None, "W3CDTF", "URI"))
    language = rng.choice((None, "pt", "en", "pt-BR"))
    return Statement(element, random_value(rng), qualifier=qualifier, scheme=scheme, language=language)


def random_record(rng: random.Random, max_statements: int = 8) -> MetadataRecord:
    count = rng.randint(1, max_statements)
    return MetadataRecord(tuple(random_statement(rng) for _ in range(count)))


def random_wire(rng: random.Random, index: int) -> WireRecord:
    repo = rng.choice(("rep1", "rep2", "acervo"))
    local = "".join(rng.choices(string.ascii_lowercase + string.digits, k=6)) + str(index)
    header = RecordHeader(
        f"oai:{repo}:{local}",
        shift(BASE_INSTANT, rng.randint(-10_000, 10_000)),
        deleted=rng.random() < 0.15,
    )
    if header.deleted:
        return WireRecord(header)
    return WireRecord(header, random_record(rng))


@pytest.fixture
def rng() -> random.Random:
    return random.Random(20010601)
