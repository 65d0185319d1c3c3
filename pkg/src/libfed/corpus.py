"""Deterministic synthetic corpora for the simulation harness: valid
records across the five document kinds, generated from fixed word lists as
a pure function of (seed, index)."""

from __future__ import annotations

import random
from pathlib import Path
from typing import Optional, Sequence

from .dc import DOCUMENT_KINDS, Element, MetadataRecord, Statement

__all__ = ["generate_record", "generate_corpus", "write_corpus", "record_to_tagged_text"]

# accented entries exercise normalization and the codecs' non-ASCII paths
TITLE_WORDS = (
    "acesso", "aberto", "arquivos", "biblioteca", "ciência", "comunicação",
    "digital", "distribuição", "documentos", "eletrônica", "informação",
    "integração", "interoperabilidade", "metadados", "pesquisa", "protocolo",
    "redes", "repositório", "tecnologia", "publicação",
)
SURNAMES = (
    "Silva", "Souza", "Oliveira", "Santos", "Pereira", "Costa", "Gonçalves",
    "Almeida", "Ribeiro", "Carvalho", "Araújo", "Fernandes",
)
INITIALS = ("A.", "B.", "C.", "D.", "E.", "F.", "J.", "L.", "M.", "P.", "R.", "T.")
SUBJECTS = (
    "bibliotecas digitais", "arquivos abertos", "metadados", "física",
    "matemática", "computação", "saúde pública", "engenharia", "química",
    "informação científica",
)
PUBLISHERS = ("IBICT", "USP", "UNICAMP", "UFSC", "PUC-Rio", "FIOCRUZ")
LANGUAGES = ("pt", "en", "es")
DEGREE_NAMES = ("Mestrado", "Doutorado")
DEGREE_LEVELS = ("masters", "doctoral")
CONFERENCES = (
    "Encontro Nacional de Pesquisa", "Simpósio Brasileiro de Redes",
    "Congresso de Informação Científica",
)


def _rng(seed: int, index: int) -> random.Random:
    # string seeding hashes with sha512, stable across runs and platforms
    return random.Random(f"{seed}:{index}")


def _pick_kind(rng: random.Random, kind_mix: Optional[dict[str, float]]) -> str:
    if kind_mix:
        kinds = sorted(kind_mix)
        weights = [kind_mix[k] for k in kinds]
        return rng.choices(kinds, weights=weights, k=1)[0]
    return rng.choice(DOCUMENT_KINDS)


def generate_record(seed: int, index: int, kind: Optional[str] = None) -> tuple[str, MetadataRecord]:
    """One valid record; a pure function of (seed, index, kind)."""
    rng = _rng(seed, index)
    picked = kind or _pick_kind(rng, None)
    title = " ".join(rng.sample(TITLE_WORDS, rng.randint(2, 5))).capitalize()
    year = rng.randint(1995, 2002)
    month = rng.randint(1, 12)
    day = rng.randint(1, 28)
    date = f"{year:04d}-{month:02d}-{day:02d}"

    statements = [
        Statement(Element.TITLE, title),
        Statement(Element.IDENTIFIER, f"doc-{seed}-{index}"),
        Statement(Element.DATE, date),
    ]
    for _ in range(rng.randint(1, 3)):
        statements.append(
            Statement(Element.CREATOR, f"{rng.choice(SURNAMES)}, {rng.choice(INITIALS)}")
        )
    for subject in rng.sample(SUBJECTS, rng.randint(1, 3)):
        statements.append(Statement(Element.SUBJECT, subject))
    statements.append(Statement(Element.LANGUAGE, rng.choice(LANGUAGES)))
    if rng.random() < 0.5:
        statements.append(
            Statement(Element.DESCRIPTION, f"Estudo sobre {rng.choice(SUBJECTS)}.")
        )

    if picked == "thesis":
        grantor = rng.choice(PUBLISHERS)
        statements += [
            Statement(Element.DESCRIPTION, rng.choice(DEGREE_NAMES), qualifier="degree-name"),
            Statement(Element.DESCRIPTION, rng.choice(DEGREE_LEVELS), qualifier="degree-level"),
            Statement(Element.DESCRIPTION, grantor, qualifier="degree-grantor"),
        ]
    elif picked == "journal-article":
        statements.append(
            Statement(
                Element.RELATION,
                f"Ciência da Informação; {rng.randint(20, 31)}; {rng.randint(1, 4)}; "
                f"{rng.randint(1, 80)}-{rng.randint(81, 160)}",
                qualifier="citation",
            )
        )
    elif picked == "conference-paper":
        statements += [
            Statement(Element.RELATION, rng.choice(CONFERENCES), qualifier="conference-name"),
            Statement(Element.DATE, date, qualifier="conference-date"),
        ]
    elif picked == "research-report":
        statements += [
            Statement(Element.PUBLISHER, rng.choice(PUBLISHERS)),
            Statement(
                Element.IDENTIFIER, f"RT-{year}-{rng.randint(1, 999):03d}", qualifier="report-number"
            ),
        ]
    return picked, MetadataRecord(tuple(statements))


def generate_corpus(
    seed: int, n: int, kind_mix: Optional[dict[str, float]] = None
) -> list[tuple[str, MetadataRecord]]:
    """n (kind, record) pairs, each valid for its kind's profile."""
    if n < 0:
        raise ValueError("n must be >= 0")
    out = []
    for index in range(n):
        rng = _rng(seed, index)
        kind = _pick_kind(rng, kind_mix)
        out.append(generate_record(seed, index, kind))
    return out


def record_to_tagged_text(record: MetadataRecord) -> str:
    lines = []
    for statement in record.statements:
        name = f"DC.{statement.element.value.capitalize()}"
        if statement.qualifier:
            name += f".{statement.qualifier}"
        lines.append(f"{name}: {statement.value}")
    return "\n".join(lines) + "\n"


def write_corpus(records: Sequence[tuple[str, MetadataRecord]], directory: str | Path) -> list[Path]:
    """One tagged-text file per record, ingestible by the harvester."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    written = []
    for position, (_, record) in enumerate(records):
        path = directory / f"record-{position:05d}.txt"
        path.write_text(record_to_tagged_text(record), encoding="utf-8")
        written.append(path)
    return written
