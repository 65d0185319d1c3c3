import json
import random

import pytest

from libfed.datestamp import shift
from libfed.dc import Element, MetadataRecord, Statement, record_from_pairs
from libfed.harvest import HarvestRequest, handle_request, parse_harvest_response
from libfed.provider import (
    ClockSkewError,
    DeletedItemError,
    ProviderStore,
    RepositoryConfig,
    SubmissionInvalid,
    UnknownIdentifierError,
)
from libfed.query import eval_query, parse_query

from conftest import BASE_INSTANT
from libfed.corpus import generate_record


@pytest.fixture
def store(tmp_path):
    provider = ProviderStore(RepositoryConfig("rep1", "Rep One", "a@b"), tmp_path / "data")
    yield provider
    provider.close()


def minimal(title="X", ident="i1", date="2001-05-01"):
    return record_from_pairs([("title", title), ("identifier", ident), ("date", date)])


class TestSubmit:
    def test_first_identifier(self, store):
        assert store.submit(minimal(), "generic", BASE_INSTANT) == "oai:rep1:1"

    def test_missing_title_rejected(self, store):
        record = record_from_pairs([("identifier", "i"), ("date", "2001")])
        with pytest.raises(SubmissionInvalid) as exc:
            store.submit(record, "generic", BASE_INSTANT)
        assert any("title" in v for v in exc.value.violations)

    def test_identifiers_strictly_increase(self, store):
        first = store.submit(minimal(ident="a"), "generic", BASE_INSTANT)
        second = store.submit(minimal(ident="b"), "generic", BASE_INSTANT)
        assert first != second
        assert int(second.rsplit(":", 1)[1]) > int(first.rsplit(":", 1)[1])

    def test_counter_never_reuses_after_delete(self, store):
        first = store.submit(minimal(), "generic", BASE_INSTANT)
        store.delete(first, shift(BASE_INSTANT, 1))
        second = store.submit(minimal(ident="b"), "generic", shift(BASE_INSTANT, 2))
        assert second == "oai:rep1:2"

    def test_unknown_kind(self, store):
        with pytest.raises(SubmissionInvalid):
            store.submit(minimal(), "novel", BASE_INSTANT)

    def test_document_stored(self, store):
        identifier = store.submit(
            minimal(), "generic", BASE_INSTANT, document=b"PDFDATA", media_type="application/pdf"
        )
        local_id = int(identifier.rsplit(":", 1)[1])
        assert store.document(local_id) == (b"PDFDATA", "application/pdf")


class TestUpdateDelete:
    def test_update_replaces_and_stamps(self, store):
        identifier = store.submit(minimal(), "generic", BASE_INSTANT)
        stamp = store.update(identifier, minimal(title="Y"), shift(BASE_INSTANT, 30))
        assert stamp == shift(BASE_INSTANT, 30)
        item = store.get(identifier)
        assert item.record.first(Element.TITLE) == "Y"
        assert item.header.datestamp == stamp

    def test_update_validates_for_original_kind(self, store):
        _, thesis = generate_record(1, 0, "thesis")
        identifier = store.submit(thesis, "thesis", BASE_INSTANT)
        with pytest.raises(SubmissionInvalid):
            store.update(identifier, minimal(), shift(BASE_INSTANT, 5))

    def test_clock_guard(self, store):
        identifier = store.submit(minimal(), "generic", shift(BASE_INSTANT, 100))
        with pytest.raises(ClockSkewError):
            store.update(identifier, minimal(title="Y"), BASE_INSTANT)

    def test_delete_then_harvest_shows_tombstone(self, store):
        identifier = store.submit(minimal(), "generic", BASE_INSTANT)
        store.delete(identifier, shift(BASE_INSTANT, 5))
        payload = handle_request(
            store.snapshot_wire(),
            store.config.info(),
            HarvestRequest("GetRecord", identifier=identifier),
            shift(BASE_INSTANT, 10),
        )
        wire = parse_harvest_response(payload).records[0]
        assert wire.header.deleted and wire.record is None

    def test_update_after_delete_rejected(self, store):
        identifier = store.submit(minimal(), "generic", BASE_INSTANT)
        store.delete(identifier, shift(BASE_INSTANT, 1))
        with pytest.raises(DeletedItemError):
            store.update(identifier, minimal(title="Y"), shift(BASE_INSTANT, 2))

    def test_double_delete_rejected(self, store):
        identifier = store.submit(minimal(), "generic", BASE_INSTANT)
        store.delete(identifier, shift(BASE_INSTANT, 1))
        with pytest.raises(DeletedItemError):
            store.delete(identifier, shift(BASE_INSTANT, 2))

    def test_unknown_identifier(self, store):
        with pytest.raises(UnknownIdentifierError):
            store.update("oai:rep1:99", minimal(), BASE_INSTANT)

    def test_identifier_stable_across_update_delete(self, store):
        identifier = store.submit(minimal(), "generic", BASE_INSTANT)
        store.update(identifier, minimal(title="Y"), shift(BASE_INSTANT, 1))
        assert store.get(identifier).header.identifier == identifier
        store.delete(identifier, shift(BASE_INSTANT, 2))
        assert store.get(identifier).header.identifier == identifier

    def test_deleted_document_gone(self, store):
        identifier = store.submit(minimal(), "generic", BASE_INSTANT, document=b"X")
        local_id = int(identifier.rsplit(":", 1)[1])
        store.delete(identifier, shift(BASE_INSTANT, 1))
        with pytest.raises(UnknownIdentifierError):
            store.document(local_id)


class TestSearchLocal:
    def test_empty_result(self, store):
        store.submit(minimal(), "generic", BASE_INSTANT)
        assert store.search_local("zzz") == (0, [])

    def test_deleted_items_never_match(self, store):
        identifier = store.submit(minimal(title="unique marker"), "generic", BASE_INSTANT)
        store.delete(identifier, shift(BASE_INSTANT, 1))
        assert store.search_local("marker")[0] == 0

    def test_syntax_error_propagates(self, store):
        with pytest.raises(Exception) as exc:
            store.search_local("title:(a")
        assert getattr(exc.value, "offset", None) == 6

    def test_order_newest_first_then_identifier(self, store):
        store.submit(minimal(title="redes a", ident="1"), "generic", shift(BASE_INSTANT, 10))
        store.submit(minimal(title="redes b", ident="2"), "generic", shift(BASE_INSTANT, 10))
        store.submit(minimal(title="redes c", ident="3"), "generic", shift(BASE_INSTANT, 99))
        _, hits = store.search_local("redes")
        assert [h[0] for h in hits] == ["oai:rep1:3", "oai:rep1:1", "oai:rep1:2"]

    def test_matches_brute_force_oracle(self, tmp_path):
        store = ProviderStore(RepositoryConfig("rep9", "", ""), tmp_path / "d9")
        rng = random.Random(5)
        for index in range(500):
            kind, record = generate_record(11, index)
            store.submit(record, kind, shift(BASE_INSTANT, rng.randint(0, 5000)))
        for identifier in [f"oai:rep9:{i}" for i in range(1, 501, 17)]:
            store.delete(identifier, shift(BASE_INSTANT, 6000))
        vocabulary = [
            "redes", "acesso", "informacao", "ciencia", "metadados",
            "pesquisa", "digital", "silva", "fisica", "publicacao",
        ]
        fields = ["", "title:", "creator:", "subject:", "any:"]
        for _ in range(200):
            parts = [rng.choice(fields) + rng.choice(vocabulary)]
            for _ in range(rng.randint(0, 2)):
                parts.append(rng.choice(["AND", "OR", "AND NOT"]))
                parts.append(rng.choice(fields) + rng.choice(vocabulary))
            text = " ".join(parts)
            node = parse_query(text)
            expected = {
                item.header.identifier
                for item in store.live_items()
                if eval_query(node, item.record)
            }
            total, hits = store.search_local(text, 0, 1000)
            assert {identifier for identifier, _ in hits} == expected, text
            assert total == len(expected)
        store.close()


class TestDurability:
    def test_restart_preserves_everything(self, tmp_path):
        config = RepositoryConfig("rep1", "Rep", "a@b")
        store = ProviderStore(config, tmp_path / "d")
        first = store.submit(minimal(ident="a"), "generic", BASE_INSTANT, document=b"doc", media_type="text/plain")
        second = store.submit(minimal(ident="b"), "generic", shift(BASE_INSTANT, 1))
        store.delete(second, shift(BASE_INSTANT, 2))
        before = {item.header.identifier: item for item in (store.get(first), store.get(second))}
        store.close()

        reopened = ProviderStore.open(config, tmp_path / "d")
        after = {item.header.identifier: item for item in (reopened.get(first), reopened.get(second))}
        assert before == after
        assert reopened.submit(minimal(ident="c"), "generic", shift(BASE_INSTANT, 3)) == "oai:rep1:3"
        reopened.close()

    def test_recovery_without_clean_close(self, tmp_path):
        config = RepositoryConfig("rep1", "Rep", "a@b")
        store = ProviderStore(config, tmp_path / "d")
        identifier = store.submit(minimal(), "generic", BASE_INSTANT)
        # no close(): simulate a crash by reopening from the log alone
        recovered = ProviderStore.open(config, tmp_path / "d")
        assert recovered.get(identifier).record == store.get(identifier).record

    def test_harvest_store_consistency(self, tmp_path):
        store = ProviderStore(RepositoryConfig("rep1", "R", "a"), tmp_path / "d")
        for index in range(30):
            kind, record = generate_record(3, index)
            store.submit(record, kind, shift(BASE_INSTANT, index))
        store.delete("oai:rep1:5", shift(BASE_INSTANT, 100))
        payload = handle_request(
            store.snapshot_wire(), store.config.info(), HarvestRequest("ListRecords"), BASE_INSTANT
        )
        response = parse_harvest_response(payload)
        assert len(response.records) == 30
        by_id = {w.header.identifier: w for w in response.records}
        assert by_id["oai:rep1:5"].header.deleted
        for item in store.live_items():
            assert by_id[item.header.identifier].record == item.record
        store.close()
