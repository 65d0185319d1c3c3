import pytest
from hypothesis import given, strategies as st

from libfed.dc import (
    DOCUMENT_KINDS,
    Element,
    MetadataRecord,
    PROFILES,
    Statement,
    fingerprint,
    normalize_text,
    record_from_pairs,
    validate_record,
)


class TestElement:
    def test_exactly_fifteen(self):
        assert len(Element) == 15

    def test_case_insensitive_lookup(self):
        assert Element("Title") is Element.TITLE
        assert Element("CREATOR") is Element.CREATOR

    def test_canonical_lowercase_output(self):
        assert Element.TITLE.value == "title"
        assert str(Element("RELATION")) == "relation"

    def test_unknown_rejected(self):
        with pytest.raises(ValueError):
            Element("isbn")


class TestValidateRecord:
    def test_minimal_generic_passes(self):
        record = record_from_pairs([("title", "X"), ("identifier", "i1"), ("date", "2001-05-01")])
        assert validate_record(record, PROFILES["generic"]) == []

    def test_thesis_missing_degree_level(self):
        record = MetadataRecord(
            (
                Statement(Element.TITLE, "T"),
                Statement(Element.IDENTIFIER, "i"),
                Statement(Element.DATE, "2001"),
                Statement(Element.DESCRIPTION, "Mestrado", qualifier="degree-name"),
                Statement(Element.DESCRIPTION, "USP", qualifier="degree-grantor"),
            )
        )
        violations = validate_record(record, PROFILES["thesis"])
        assert len(violations) == 1
        assert "description" in violations[0] and "degree-level" in violations[0]

    def test_blank_value_is_malformed(self):
        record = MetadataRecord(
            (
                Statement(Element.TITLE, "   "),
                Statement(Element.IDENTIFIER, "i"),
                Statement(Element.DATE, "2001"),
            )
        )
        violations = validate_record(record, PROFILES["generic"])
        assert len(violations) == 1
        assert "empty" in violations[0]

    def test_bad_qualifier_reported(self):
        record = record_from_pairs([("title", "T"), ("identifier", "i"), ("date", "2001")])
        spiked = MetadataRecord(record.statements + (Statement(Element.SUBJECT, "x", qualifier="no spaces!"),))
        assert any("qualifier" in v for v in validate_record(spiked, PROFILES["generic"]))

    def test_unknown_qualifiers_tolerated(self):
        record = MetadataRecord(
            (
                Statement(Element.TITLE, "T", qualifier="weird-but-legal"),
                Statement(Element.IDENTIFIER, "i"),
                Statement(Element.DATE, "2001"),
            )
        )
        assert validate_record(record, PROFILES["generic"]) == []

    @pytest.mark.parametrize("kind", DOCUMENT_KINDS)
    def test_every_profile_demands_title_identifier_date(self, kind):
        required = PROFILES[kind].required
        for element in (Element.TITLE, Element.IDENTIFIER, Element.DATE):
            assert (element, None) in required


class TestNormalizeText:
    def test_diacritics_and_punctuation(self):
        assert normalize_text("Ciência  da Informação!") == "ciencia da informacao"

    def test_empty(self):
        assert normalize_text("") == ""

    def test_case_folding_only(self):
        assert normalize_text("ABC") == "abc"

    @given(st.text(max_size=60))
    def test_idempotent(self, s):
        once = normalize_text(s)
        assert normalize_text(once) == once

    @given(st.text(max_size=60))
    def test_output_shape(self, s):
        out = normalize_text(s)
        assert out == out.strip()
        assert "  " not in out
        assert out == out.lower()


class TestFingerprint:
    def test_worked_example(self):
        record = record_from_pairs(
            [
                ("title", "Open Archives"),
                ("creator", "Silva, A."),
                ("creator", "Souza, B."),
                ("date", "2001-09-01"),
            ]
        )
        assert fingerprint(record) == "open archives|silva a;souza b|2001"

    def test_all_absent(self):
        assert fingerprint(MetadataRecord()) == "||----"

    def test_statement_order_irrelevant(self):
        forward = record_from_pairs(
            [("creator", "Souza, B."), ("creator", "Silva, A."), ("title", "T"), ("date", "2001")]
        )
        backward = record_from_pairs(
            [("title", "T"), ("date", "2001"), ("creator", "Silva, A."), ("creator", "Souza, B.")]
        )
        assert fingerprint(forward) == fingerprint(backward)

    def test_diacritic_and_punctuation_invariance(self):
        plain = record_from_pairs([("title", "acao e reacao"), ("creator", "Goncalves M"), ("date", "1999")])
        fancy = record_from_pairs([("title", "Ação — e reação!"), ("creator", "Gonçalves, M."), ("date", "1999-12")])
        assert fingerprint(plain) == fingerprint(fancy)

    def test_year_from_first_parseable_date(self):
        record = record_from_pairs([("title", "T"), ("date", "n.d."), ("date", "2001-05")])
        assert fingerprint(record).endswith("|2001")

    def test_unparseable_dates_give_placeholder(self):
        record = record_from_pairs([("title", "T"), ("date", "circa 99")])
        assert fingerprint(record).endswith("|----")
