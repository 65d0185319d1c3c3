import random
import time
from fractions import Fraction

import pytest

from libfed.corpus import generate_record
from libfed.datestamp import shift, utcnow
from libfed.dc import record_from_pairs
from libfed.gateway import (
    Gateway,
    MergedResult,
    ProviderOutcome,
    ProviderRegistry,
    RegistryError,
    SearchTarget,
    broadcast,
    merge,
)
from libfed.harvester import CheckpointStore, Harvester, JobStore, ProviderDescriptor
from libfed.provider import ProviderStore, RepositoryConfig
from libfed.query import QuerySyntaxError
from libfed.servers import ProviderServer
from libfed.union import UnionIndex


def outcome(provider, *titled, status="ok"):
    records = [
        (f"oai:{provider}:{i}", record_from_pairs([("title", t), ("identifier", f"d{i}"), ("date", "2001")]))
        for i, t in enumerate(titled)
    ]
    return ProviderOutcome(provider, status, 5, records if status == "ok" else [])


class TestRegistry:
    def test_add_list_remove_with_persistence(self, tmp_path):
        path = tmp_path / "registry.json"
        registry = ProviderRegistry(path)
        registry.add(ProviderDescriptor("scielo", "http://x", ("harvest",)))
        assert [p.provider_id for p in registry.list()] == ["scielo"]

        reloaded = ProviderRegistry(path)
        assert [p.provider_id for p in reloaded.list()] == ["scielo"]
        assert reloaded.get("scielo").modes == ("harvest",)

        reloaded.remove("scielo")
        assert reloaded.list() == []
        assert ProviderRegistry(path).list() == []

    def test_duplicate_rejected(self, tmp_path):
        registry = ProviderRegistry(tmp_path / "r.json")
        registry.add(ProviderDescriptor("a", "http://x"))
        with pytest.raises(RegistryError):
            registry.add(ProviderDescriptor("a", "http://y"))

    def test_unknown_remove_rejected(self, tmp_path):
        registry = ProviderRegistry(tmp_path / "r.json")
        with pytest.raises(RegistryError):
            registry.remove("ghost")

    def test_union_id_reserved(self, tmp_path):
        registry = ProviderRegistry(tmp_path / "r.json")
        with pytest.raises(RegistryError):
            registry.add(ProviderDescriptor("union", "http://x"))


class TestMerge:
    def test_rank_zero_plus_rank_one(self):
        shared = record_from_pairs([("title", "Shared Doc"), ("creator", "Silva, A."), ("date", "2001")])
        first = ProviderOutcome("rep1", "ok", 1, [("oai:rep1:1", shared)])
        second = ProviderOutcome(
            "rep2", "ok", 1,
            [("oai:rep2:9", record_from_pairs([("title", "Other"), ("date", "1999")])), ("oai:rep2:3", shared)],
        )
        merged = merge([first, second])
        assert merged[0].merged_score == Fraction(3, 2)
        assert len(merged[0].sources) == 2

    def test_three_fixture_cases(self):
        shared = record_from_pairs([("title", "A"), ("date", "2001")])
        # ranks 0+0 -> 2.0; ranks 1+2 -> 1/2 + 1/3; rank 0 alone -> 1.0
        a = merge([
            ProviderOutcome("p1", "ok", 1, [("oai:p1:1", shared)]),
            ProviderOutcome("p2", "ok", 1, [("oai:p2:1", shared)]),
        ])
        assert a[0].merged_score == Fraction(2)
        filler1 = record_from_pairs([("title", "F1"), ("date", "1991")])
        filler2 = record_from_pairs([("title", "F2"), ("date", "1992")])
        b = merge([
            ProviderOutcome("p1", "ok", 1, [("oai:p1:9", filler1), ("oai:p1:1", shared)]),
            ProviderOutcome("p2", "ok", 1, [("oai:p2:8", filler1), ("oai:p2:7", filler2), ("oai:p2:1", shared)]),
        ])
        by_fp = {m.fingerprint: m for m in b}
        assert by_fp["a||2001"].merged_score == Fraction(1, 2) + Fraction(1, 3)
        c = merge([ProviderOutcome("p1", "ok", 1, [("oai:p1:1", shared)])])
        assert c[0].merged_score == Fraction(1)

    def test_all_distinct_no_dedup(self):
        merged = merge([outcome("p1", "um", "dois"), outcome("p2", "tres")])
        assert len(merged) == 3

    def test_permutation_invariance(self):
        outcomes = [outcome("p1", "um", "dois"), outcome("p2", "um"), outcome("p3", "tres", "um")]
        expected = merge(outcomes)
        for _ in range(5):
            random.shuffle(outcomes)
            shuffled = merge(outcomes)
            assert [(m.fingerprint, m.merged_score, m.sources) for m in shuffled] == [
                (m.fingerprint, m.merged_score, m.sources) for m in expected
            ]

    def test_failed_outcomes_contribute_nothing(self):
        merged = merge([outcome("p1", "um"), outcome("p2", status="timeout"), outcome("p3", status="error")])
        assert len(merged) == 1

    def test_dedup_soundness_and_completeness(self):
        rng = random.Random(9)
        outcomes = []
        for provider in ("p1", "p2", "p3"):
            records = [generate_record(4, rng.randint(0, 60))[1] for _ in range(20)]
            outcomes.append(
                ProviderOutcome(provider, "ok", 1, [(f"oai:{provider}:{i}", r) for i, r in enumerate(records)])
            )
        merged = merge(outcomes)
        from libfed.dc import fingerprint

        seen = set()
        for result in merged:
            assert result.fingerprint not in seen  # completeness: one result per fingerprint
            seen.add(result.fingerprint)
            for provider, identifier, rank in result.sources:
                source_outcome = next(o for o in outcomes if o.provider_id == provider)
                identifier_at_rank, record_at_rank = source_outcome.records[rank]
                assert identifier_at_rank == identifier
                assert fingerprint(record_at_rank) == result.fingerprint  # soundness

    def test_best_record_has_most_statements(self):
        sparse = record_from_pairs([("title", "Doc"), ("date", "2001")])
        rich = record_from_pairs([("title", "Doc!"), ("date", "2001-05"), ("subject", "x"), ("publisher", "y")])
        merged = merge([
            ProviderOutcome("zz", "ok", 1, [("oai:zz:1", rich)]),
            ProviderOutcome("aa", "ok", 1, [("oai:aa:1", sparse)]),
        ])
        assert merged[0].best_record == rich


@pytest.fixture
def live_stack(tmp_path):
    """Three live providers, a harvested union index, and a gateway."""
    providers = {}
    servers = {}
    registry = ProviderRegistry(tmp_path / "registry.json")
    union = UnionIndex(tmp_path / "union")
    harvester = Harvester(union, CheckpointStore(tmp_path / "ck.json"), JobStore(), backoff=(0.0,))
    base = shift(utcnow(), -5000)
    for n, repo in enumerate(("alpha", "beta", "gamma")):
        store = ProviderStore(RepositoryConfig(repo, repo, "a@b"), tmp_path / repo)
        for index in range(20):
            kind, record = generate_record(100 + n, index)
            store.submit(record, kind, shift(base, index))
        server = ProviderServer(store)
        server.start()
        providers[repo], servers[repo] = store, server
        registry.add(ProviderDescriptor(repo, server.base_url))
        harvester.run_full(registry.get(repo))
    gateway = Gateway(registry, union, per_provider_deadline_ms=2000, overall_deadline_ms=5000)
    yield registry, union, gateway, providers, servers
    for repo in providers:
        servers[repo].stop()
        providers[repo].close()
    union.close()


class TestBroadcast:
    def test_empty_target_list(self):
        assert broadcast("x", []) == []

    def test_outcomes_in_registry_order(self, live_stack):
        registry, union, gateway, providers, servers = live_stack
        targets = [
            SearchTarget(p.provider_id, p.base_url + "/search") for p in registry.list()
        ]
        outcomes = broadcast("(any:redes)", targets)
        assert [o.provider_id for o in outcomes] == ["alpha", "beta", "gamma"]
        assert all(o.status == "ok" for o in outcomes)

    def test_slow_target_times_out_without_stalling_others(self, live_stack):
        registry, union, gateway, providers, servers = live_stack
        servers["beta"].search_delay_seconds = 10
        targets = [
            SearchTarget(p.provider_id, p.base_url + "/search") for p in registry.list()
        ]
        started = time.monotonic()
        outcomes = broadcast("(any:redes)", targets, 2000, 5000)
        elapsed = time.monotonic() - started
        assert elapsed < 2.5
        by_provider = {o.provider_id: o.status for o in outcomes}
        assert by_provider == {"alpha": "ok", "beta": "timeout", "gamma": "ok"}

    def test_dead_target_is_error(self):
        outcomes = broadcast("(any:x)", [SearchTarget("ghost", "http://127.0.0.1:9/search")])
        assert outcomes[0].status == "error"


class TestUnifiedSearch:
    def test_union_and_provider_sources_merge(self, live_stack):
        registry, union, gateway, providers, servers = live_stack
        response = gateway.unified_search("redes OR acesso OR informacao", 0, 50)
        assert not response.partial
        assert response.results, "corpus should match something"
        for result in response.results:
            source_ids = {p for p, _, _ in result.sources}
            assert "union" in source_ids  # harvested copy
            assert len(result.sources) >= 2  # plus the live provider

    def test_empty_registry_serves_from_union(self, tmp_path):
        union = UnionIndex(tmp_path / "u")
        kind, record = generate_record(5, 1)
        from libfed.codecs import RecordHeader
        from libfed.union import IndexedEntry

        union.upsert(IndexedEntry("rep1", RecordHeader("oai:rep1:1", utcnow()), record))
        gateway = Gateway(ProviderRegistry(tmp_path / "r.json"), union)
        title_word = record.statements[0].value.split()[0]
        response = gateway.unified_search(title_word, 0, 10)
        assert not response.partial
        assert [o.provider_id for o in response.outcomes] == ["union"]
        assert response.results
        union.close()

    def test_syntax_error_contacts_nobody(self, live_stack):
        registry, union, gateway, providers, servers = live_stack
        for server in servers.values():
            server.search_delay_seconds = 10  # would blow the deadline if contacted
        started = time.monotonic()
        with pytest.raises(QuerySyntaxError):
            gateway.unified_search("title:(a", 0, 10)
        assert time.monotonic() - started < 0.5
        for server in servers.values():
            server.search_delay_seconds = 0

    def test_fault_isolation(self, live_stack):
        registry, union, gateway, providers, servers = live_stack
        healthy = gateway.unified_search("redes OR acesso OR informacao", 0, 100)
        servers["gamma"].search_delay_seconds = 10
        started = time.monotonic()
        degraded = gateway.unified_search("redes OR acesso OR informacao", 0, 100)
        assert time.monotonic() - started < 2.5
        assert degraded.partial
        statuses = {o.provider_id: o.status for o in degraded.outcomes}
        assert statuses["gamma"] == "timeout"
        # every result derivable from healthy sources is still present
        degraded_fps = {r.fingerprint for r in degraded.results}
        for result in healthy.results:
            if all(p != "gamma" for p, _, _ in result.sources):
                assert result.fingerprint in degraded_fps

    def test_windowing_concatenation(self, live_stack):
        registry, union, gateway, providers, servers = live_stack
        whole = gateway.unified_search("redes OR acesso OR informacao OR ciencia", 0, 10_000)
        paged = []
        step = 7
        for start in range(0, whole.total, step):
            page = gateway.unified_search("redes OR acesso OR informacao OR ciencia", start, step)
            paged.extend(page.results)
        assert [r.fingerprint for r in paged] == [r.fingerprint for r in whole.results]

    def test_removed_provider_not_contacted(self, live_stack):
        registry, union, gateway, providers, servers = live_stack
        registry.remove("beta")
        response = gateway.unified_search("redes OR acesso", 0, 10)
        assert {o.provider_id for o in response.outcomes} == {"union", "alpha", "gamma"}
