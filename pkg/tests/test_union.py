import json
import random

import pytest

from libfed.codecs import RecordHeader
from libfed.corpus import generate_record
from libfed.datestamp import shift
from libfed.dc import record_from_pairs
from libfed.query import eval_query, parse_query
from libfed.union import IndexedEntry, UnionIndex

from conftest import BASE_INSTANT


@pytest.fixture
def index(tmp_path):
    union = UnionIndex(tmp_path / "union")
    yield union
    union.close()


def entry(provider, local, record, offset=0, deleted=False):
    header = RecordHeader(f"oai:{provider}:{local}", shift(BASE_INSTANT, offset), deleted=deleted)
    return IndexedEntry(provider, header, None if deleted else record)


def seeded_entries(count, seed=17):
    rng = random.Random(seed)
    out = []
    for index in range(count):
        kind, record = generate_record(seed, index)
        provider = rng.choice(("rep1", "rep2", "rep3"))
        out.append(entry(provider, index, record, offset=rng.randint(0, 9000)))
    return out


class TestUpsert:
    def test_read_your_write(self, index):
        record = record_from_pairs([("title", "X"), ("identifier", "i"), ("date", "2001")])
        item = entry("rep1", 1, record)
        index.upsert(item)
        assert index.get("rep1", "oai:rep1:1") == item

    def test_mark_deleted_removes_from_results(self, index):
        record = record_from_pairs([("title", "peculiar topic"), ("identifier", "i"), ("date", "2001")])
        index.upsert(entry("rep1", 1, record))
        assert index.query("peculiar")[0] == 1
        index.mark_deleted("rep1", "oai:rep1:1", shift(BASE_INSTANT, 5))
        assert index.query("peculiar")[0] == 0
        assert len(index) == 1  # tombstone retained

    def test_replacement_updates_postings(self, index):
        old = record_from_pairs([("title", "ancient term"), ("identifier", "i"), ("date", "2001")])
        new = record_from_pairs([("title", "modern term"), ("identifier", "i"), ("date", "2001")])
        index.upsert(entry("rep1", 1, old))
        index.upsert(entry("rep1", 1, new, offset=5))
        assert index.query("ancient")[0] == 0
        assert index.query("modern")[0] == 1

    def test_fingerprint_exposed(self, index):
        record = record_from_pairs([("title", "T"), ("creator", "Silva, A."), ("date", "2001")])
        item = entry("rep1", 1, record)
        assert item.fingerprint == "t|silva a|2001"


class TestQuery:
    def test_empty_index(self, index):
        assert index.query("anything") == (0, [])

    def test_weighted_term_frequency_score(self, index):
        record = record_from_pairs([("title", "xml xml"), ("identifier", "i"), ("date", "2001")])
        index.upsert(entry("rep1", 1, record))
        _, hits = index.query("title:xml")
        assert hits[0][2] == 6  # weight 3 x tf 2

    def test_any_takes_best_field(self, index):
        record = record_from_pairs(
            [("title", "xml"), ("description", "xml xml xml xml"), ("identifier", "i"), ("date", "2001")]
        )
        index.upsert(entry("rep1", 1, record))
        _, hits = index.query("xml")
        # description tf 4 x weight 1 beats title tf 1 x weight 3
        assert hits[0][2] == 4

    def test_distinct_clauses_sum(self, index):
        record = record_from_pairs(
            [("title", "redes"), ("creator", "Silva"), ("identifier", "i"), ("date", "2001")]
        )
        index.upsert(entry("rep1", 1, record))
        _, hits = index.query("title:redes AND creator:silva")
        assert hits[0][2] == 5  # 3 + 2

    def test_repeated_clause_counts_once(self, index):
        record = record_from_pairs([("title", "redes"), ("identifier", "i"), ("date", "2001")])
        index.upsert(entry("rep1", 1, record))
        _, once = index.query("title:redes")
        _, twice = index.query("title:redes OR title:redes")
        assert once[0][2] == twice[0][2] == 3

    def test_membership_equals_brute_force_oracle(self, index):
        entries = seeded_entries(400)
        for item in entries:
            index.upsert(item)
        for key in list({e.key for e in entries})[::23]:
            index.mark_deleted(key[0], key[1], shift(BASE_INSTANT, 10_000))
        queries = [
            "redes", "title:informacao", "acesso AND metadados", "NOT pesquisa",
            "title:redes OR creator:silva", 'subject:"bibliotecas digitais"',
            "publicacao NOT title:acervo", "(acesso OR redes) AND ciencia",
        ]
        for text in queries:
            node = parse_query(text)
            expected = {
                e.key for e in index.live_entries() if eval_query(node, e.record)
            }
            total, hits = index.query(text, 0, 10_000)
            assert {(p, i) for p, i, _, _ in hits} == expected
            assert total == len(expected)

    def test_repeat_queries_byte_identical(self, index):
        for item in seeded_entries(120):
            index.upsert(item)
        for text in ("redes", "acesso AND ciencia", "NOT informacao"):
            first = json.dumps(index.query(text, 0, 50), default=str)
            second = json.dumps(index.query(text, 0, 50), default=str)
            assert first == second

    def test_windowing(self, index):
        for item in seeded_entries(60):
            index.upsert(item)
        total, everything = index.query("redes OR acesso OR ciencia", 0, 10_000)
        paged = []
        for start in range(0, total, 7):
            _, page = index.query("redes OR acesso OR ciencia", start, 7)
            paged.extend(page)
        assert paged == everything


class TestRebuildAndPersistence:
    def test_rebuild_changes_no_outcome(self, index):
        for item in seeded_entries(100):
            index.upsert(item)
        queries = ["redes", "title:acesso", "ciencia AND NOT acervo"]
        before = [index.query(q, 0, 100) for q in queries]
        index.rebuild()
        after = [index.query(q, 0, 100) for q in queries]
        assert before == after

    def test_rebuild_empty(self, index):
        index.rebuild()
        assert index.query("x") == (0, [])

    def test_restart_preserves_entries_and_tombstones(self, tmp_path):
        union = UnionIndex(tmp_path / "u")
        entries = seeded_entries(50)
        for item in entries:
            union.upsert(item)
        union.mark_deleted(entries[0].provider_id, entries[0].header.identifier, shift(BASE_INSTANT, 99_999))
        expected = {e.key: e for e in union.entries()}
        union.close()

        reopened = UnionIndex.open(tmp_path / "u")
        assert {e.key: e for e in reopened.entries()} == expected
        reopened.close()

    def test_recovery_without_clean_close_equals_log_replay(self, tmp_path):
        union = UnionIndex(tmp_path / "u")
        for item in seeded_entries(30):
            union.upsert(item)
        live_state = {e.key: e for e in union.entries()}
        # crash: no close(), recover purely from the journal
        recovered = UnionIndex.open(tmp_path / "u")
        assert {e.key: e for e in recovered.entries()} == live_state
        recovered.close()


class TestProviderSemanticsParity:
    def test_same_corpus_same_membership_as_provider_search(self, tmp_path):
        """The union's search agrees with a provider's local search on the
        same corpus, score field aside."""
        from libfed.provider import ProviderStore, RepositoryConfig
        from libfed.datestamp import shift as dshift

        store = ProviderStore(RepositoryConfig("twin", "", ""), tmp_path / "twin")
        union = UnionIndex(tmp_path / "twin-union")
        for index in range(120):
            kind, record = generate_record(14, index)
            identifier = store.submit(record, kind, dshift(BASE_INSTANT, index))
            union.upsert(
                IndexedEntry("twin", RecordHeader(identifier, dshift(BASE_INSTANT, index)), record)
            )
        for text in ("redes", "title:acesso OR creator:silva", "ciencia AND NOT acervo"):
            _, provider_hits = store.search_local(text, 0, 1000)
            _, union_hits = union.query(text, 0, 1000)
            assert {i for i, _ in provider_hits} == {i for _, i, _, _ in union_hits}
        store.close()
        union.close()
