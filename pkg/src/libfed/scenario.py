"""Desk-scale simulation harness: line-oriented scenario scripts drive
in-process providers, the harvester and the gateway through their public
endpoints, with seeded corpora, scripted churn and fault injection.

Scenario files hold one step per line (``#`` starts a comment)::

    start-provider <providerId>
    submit <providerId> <n>
    update <providerId> <fraction>
    delete <providerId> <fraction>
    harvest <providerId> full|incremental
    inject-delay <providerId> <millis>
    search <query text>
    assert union-size <n> | union-live <n> | provider-size <id> <n>
         | result-count <n> | partial true|false | elapsed-lt <millis>
         | min-sources <k> | converged

Replaying the same scenario with the same seed reproduces identical end
states; reports differ only in wall-clock timing fields. The report can be
written out as a TSV plus rendered step-timing figures.
"""

from __future__ import annotations

import logging
import shutil
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path
from random import Random
from typing import Optional

from .corpus import generate_record
from .datestamp import utcnow
from .dc import Element, MetadataRecord, Statement
from .gateway import Gateway, ProviderRegistry, UnifiedResponse
from .harvester import CheckpointStore, Harvester, JobStore, ProviderDescriptor
from .provider import ProviderStore, RepositoryConfig
from .servers import ProviderServer
from .union import UnionIndex

__all__ = ["Scenario", "ScenarioError", "StepReport", "ScenarioReport", "run_scenario"]

logger = logging.getLogger(__name__)

STEP_KINDS = (
    "start-provider",
    "submit",
    "update",
    "delete",
    "harvest",
    "inject-delay",
    "search",
    "assert",
)

ASSERT_NAMES = (
    "union-size",
    "union-live",
    "provider-size",
    "result-count",
    "partial",
    "elapsed-lt",
    "min-sources",
    "converged",
)


class ScenarioError(ValueError):
    pass


@dataclass(frozen=True)
class Step:
    line_no: int
    kind: str
    args: tuple[str, ...]

    @property
    def text(self) -> str:
        return " ".join((self.kind,) + self.args)


@dataclass(frozen=True)
class Scenario:
    seed: int
    steps: tuple[Step, ...]

    @classmethod
    def parse(cls, text: str, seed: int = 0) -> "Scenario":
        steps = []
        for line_no, raw in enumerate(text.splitlines(), start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            kind = parts[0]
            if kind not in STEP_KINDS:
                raise ScenarioError(f"line {line_no}: unknown step {kind!r}")
            args = tuple(parts[1:])
            if kind == "search":
                # the query keeps its spaces
                args = (line.split(None, 1)[1],) if len(parts) > 1 else ()
            cls._check_arity(line_no, kind, args)
            steps.append(Step(line_no, kind, args))
        return cls(seed, tuple(steps))

    @staticmethod
    def _check_arity(line_no: int, kind: str, args: tuple[str, ...]) -> None:
        expected = {
            "start-provider": (1, 1),
            "submit": (2, 2),
            "update": (2, 2),
            "delete": (2, 2),
            "harvest": (2, 2),
            "inject-delay": (2, 2),
            "search": (1, 1),
            "assert": (1, 3),
        }[kind]
        if not expected[0] <= len(args) <= expected[1]:
            raise ScenarioError(f"line {line_no}: {kind} takes {expected[0]}-{expected[1]} arguments")
        if kind == "harvest" and args[1] not in ("full", "incremental"):
            raise ScenarioError(f"line {line_no}: harvest kind must be full or incremental")
        if kind == "assert" and args[0] not in ASSERT_NAMES:
            raise ScenarioError(f"line {line_no}: unknown assertion {args[0]!r}")


@dataclass
class StepReport:
    index: int
    kind: str
    text: str
    status: str  # ok | fail | error
    detail: str = ""
    elapsed_ms: int = 0


@dataclass
class ScenarioReport:
    seed: int
    steps: list[StepReport] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(s.status == "ok" for s in self.steps)

    @property
    def assertions(self) -> list[StepReport]:
        return [s for s in self.steps if s.kind == "assert"]

    def to_text(self) -> str:
        lines = [f"scenario seed={self.seed}"]
        for s in self.steps:
            mark = {"ok": "PASS", "fail": "FAIL", "error": "ERROR"}[s.status]
            detail = f"  {s.detail}" if s.detail else ""
            lines.append(f"[{mark}] step {s.index}: {s.text}{detail}")
        lines.append(f"result: {'PASS' if self.passed else 'FAIL'}")
        return "\n".join(lines)

    def to_tsv(self) -> str:
        rows = ["step\tkind\ttext\tstatus\tdetail\telapsed_ms"]
        for s in self.steps:
            detail = s.detail.replace("\t", " ").replace("\n", " ")
            rows.append(f"{s.index}\t{s.kind}\t{s.text}\t{s.status}\t{detail}\t{s.elapsed_ms}")
        return "\n".join(rows) + "\n"


class _SimProvider:
    def __init__(self, provider_id: str, workdir: Path):
        self.provider_id = provider_id
        self.store = ProviderStore(
            RepositoryConfig(provider_id, f"Simulated {provider_id}", "sim@example"),
            workdir / provider_id,
        )
        self.server = ProviderServer(self.store)
        self.server.start()
        self.submitted = 0

    def close(self):
        self.server.stop()
        self.store.close()


class ScenarioRunner:
    def __init__(self, scenario: Scenario, workdir: Optional[Path] = None):
        self.scenario = scenario
        self._own_workdir = workdir is None
        self.workdir = Path(workdir) if workdir else Path(tempfile.mkdtemp(prefix="libfed-scenario-"))
        self.providers: dict[str, _SimProvider] = {}
        union_dir = self.workdir / "union"
        self.union = UnionIndex(union_dir)
        self.checkpoints = CheckpointStore(union_dir / "checkpoints.json")
        self.jobs = JobStore(union_dir / "jobs.jsonl")
        self.harvester = Harvester(self.union, self.checkpoints, self.jobs, backoff=(0.0, 0.0, 0.0))
        self.registry = ProviderRegistry(self.workdir / "registry.json")
        self.gateway = Gateway(self.registry, self.union)
        self.last_search: Optional[UnifiedResponse] = None
        self.last_search_ms: int = 0

    # --- steps ---------------------------------------------------------------

    def _provider(self, provider_id: str) -> _SimProvider:
        if provider_id not in self.providers:
            raise ScenarioError(f"provider {provider_id!r} was never started")
        return self.providers[provider_id]

    def step_start_provider(self, provider_id: str) -> str:
        if provider_id in self.providers:
            raise ScenarioError(f"provider {provider_id!r} already started")
        sim = _SimProvider(provider_id, self.workdir)
        self.providers[provider_id] = sim
        self.registry.add(ProviderDescriptor(provider_id, sim.server.base_url))
        logger.info("provider %s listening on %s", provider_id, sim.server.base_url)
        return "started"

    def step_submit(self, provider_id: str, count: str) -> str:
        sim = self._provider(provider_id)
        now = utcnow()
        for _ in range(int(count)):
            seed_index = sim.submitted
            kind, record = generate_record(self.scenario.seed, seed_index)
            sim.store.submit(record, kind, now)
            sim.submitted += 1
        return f"{int(count)} records"

    def _pick(self, items: list, fraction: float, salt: str) -> list:
        rng = Random(f"{self.scenario.seed}:{salt}")
        count = int(len(items) * fraction)
        return rng.sample(items, count) if count else []

    def step_update(self, provider_id: str, fraction: str) -> str:
        sim = self._provider(provider_id)
        now = utcnow()
        live = sorted(sim.store.live_items(), key=lambda i: i.local_id)
        chosen = self._pick(live, float(fraction), f"update:{provider_id}:{len(live)}")
        for item in chosen:
            statements = [
                Statement(Element.TITLE, item.record.first(Element.TITLE) + " revisado")
            ] + [s for s in item.record.statements if s.element is not Element.TITLE]
            sim.store.update(item.header.identifier, MetadataRecord(tuple(statements)), now)
        return f"{len(chosen)} updated"

    def step_delete(self, provider_id: str, fraction: str) -> str:
        sim = self._provider(provider_id)
        now = utcnow()
        live = sorted(sim.store.live_items(), key=lambda i: i.local_id)
        chosen = self._pick(live, float(fraction), f"delete:{provider_id}:{len(live)}")
        for item in chosen:
            sim.store.delete(item.header.identifier, now)
        return f"{len(chosen)} deleted"

    def step_harvest(self, provider_id: str, kind: str) -> str:
        descriptor = self.registry.get(provider_id)
        job = (
            self.harvester.run_full(descriptor)
            if kind == "full"
            else self.harvester.run_incremental(descriptor)
        )
        if job.state != "succeeded":
            raise ScenarioError(f"harvest failed: {'; '.join(job.error_log)}")
        return f"counts {job.counts}"

    def step_inject_delay(self, provider_id: str, millis: str) -> str:
        self._provider(provider_id).server.search_delay_seconds = int(millis) / 1000.0
        return f"{millis} ms"

    def step_search(self, query_text: str) -> str:
        started = time.monotonic()
        self.last_search = self.gateway.unified_search(query_text, 0, 50)
        self.last_search_ms = int((time.monotonic() - started) * 1000)
        return (
            f"{self.last_search.total} results, partial={self.last_search.partial}, "
            f"{self.last_search_ms} ms"
        )

    # --- assertions -----------------------------------------------------------

    def check_assertion(self, args: tuple[str, ...]) -> tuple[bool, str]:
        name = args[0]
        if name == "union-size":
            actual = len(self.union)
            return actual == int(args[1]), f"union size {actual}, expected {args[1]}"
        if name == "union-live":
            actual = len(self.union.live_entries())
            return actual == int(args[1]), f"live entries {actual}, expected {args[1]}"
        if name == "provider-size":
            actual = len(self._provider(args[1]).store)
            return actual == int(args[2]), f"provider {args[1]} holds {actual}, expected {args[2]}"
        if name == "result-count":
            self._need_search()
            actual = self.last_search.total
            return actual == int(args[1]), f"{actual} results, expected {args[1]}"
        if name == "partial":
            self._need_search()
            expected = args[1] == "true"
            return (
                self.last_search.partial == expected,
                f"partial={str(self.last_search.partial).lower()}, expected {args[1]}",
            )
        if name == "elapsed-lt":
            self._need_search()
            return (
                self.last_search_ms < int(args[1]),
                f"search took {self.last_search_ms} ms, limit {args[1]}",
            )
        if name == "min-sources":
            self._need_search()
            minimum = int(args[1])
            worst = min((len(r.sources) for r in self.last_search.results), default=0)
            return worst >= minimum, f"fewest sources {worst}, expected >= {minimum}"
        if name == "converged":
            return self._check_converged()
        raise ScenarioError(f"unknown assertion {name!r}")

    def _need_search(self) -> None:
        if self.last_search is None:
            raise ScenarioError("assertion needs a preceding search step")

    def _check_converged(self) -> tuple[bool, str]:
        """Oracle: a fresh full harvest of every provider into an empty
        index must equal the incrementally maintained one."""
        oracle_dir = Path(tempfile.mkdtemp(prefix="libfed-oracle-"))
        oracle = UnionIndex(oracle_dir / "union")
        try:
            fresh = Harvester(
                oracle,
                CheckpointStore(oracle_dir / "checkpoints.json"),
                JobStore(),
                backoff=(0.0, 0.0, 0.0),
            )
            for descriptor in self.registry.list():
                if "harvest" in descriptor.modes:
                    job = fresh.run_full(descriptor)
                    if job.state != "succeeded":
                        return False, f"oracle harvest of {descriptor.provider_id} failed"
            mine = {e.key: e for e in self.union.entries()}
            theirs = {e.key: e for e in oracle.entries()}
            if mine == theirs:
                return True, f"{len(mine)} entries converged"
            missing = sorted(set(theirs) - set(mine))[:3]
            extra = sorted(set(mine) - set(theirs))[:3]
            differing = sorted(
                k for k in set(mine) & set(theirs) if mine[k] != theirs[k]
            )[:3]
            return False, f"missing={missing} extra={extra} differing={differing}"
        finally:
            oracle.close()
            shutil.rmtree(oracle_dir, ignore_errors=True)

    # --- driver ----------------------------------------------------------------

    def run(self) -> ScenarioReport:
        report = ScenarioReport(self.scenario.seed)
        actions = {
            "start-provider": self.step_start_provider,
            "submit": self.step_submit,
            "update": self.step_update,
            "delete": self.step_delete,
            "harvest": self.step_harvest,
            "inject-delay": self.step_inject_delay,
            "search": self.step_search,
        }
        try:
            for index, step in enumerate(self.scenario.steps, start=1):
                started = time.monotonic()
                if step.kind == "assert":
                    try:
                        ok, detail = self.check_assertion(step.args)
                        status = "ok" if ok else "fail"
                    except ScenarioError as exc:
                        status, detail = "error", str(exc)
                else:
                    try:
                        detail = actions[step.kind](*step.args)
                        status = "ok"
                    except (ScenarioError, ValueError, KeyError) as exc:
                        status, detail = "error", str(exc)
                report.steps.append(
                    StepReport(
                        index,
                        step.kind,
                        step.text,
                        status,
                        detail,
                        int((time.monotonic() - started) * 1000),
                    )
                )
                if status == "error":
                    break
        finally:
            self.close()
        return report

    def close(self) -> None:
        for sim in self.providers.values():
            sim.close()
        self.union.close()
        if self._own_workdir:
            shutil.rmtree(self.workdir, ignore_errors=True)


def render_report_figures(report: ScenarioReport, directory: Path) -> list[Path]:
    """Step-timing chart next to the delimited report."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    directory.mkdir(parents=True, exist_ok=True)
    written = []
    if report.steps:
        colors = {"ok": "#2a9d8f", "fail": "#e76f51", "error": "#9b2226"}
        labels = [f"{s.index}: {s.kind}" for s in report.steps]
        values = [s.elapsed_ms for s in report.steps]
        fig, ax = plt.subplots(figsize=(8, max(2.0, 0.35 * len(report.steps))))
        ax.barh(labels, values, color=[colors[s.status] for s in report.steps])
        ax.invert_yaxis()
        ax.set_xlabel("elapsed (ms)")
        ax.set_title(f"scenario steps (seed={report.seed})")
        fig.tight_layout()
        path = directory / "step-timings.png"
        fig.savefig(path, dpi=110)
        plt.close(fig)
        written.append(path)
    return written


def write_report(report: ScenarioReport, directory: str | Path) -> list[Path]:
    """Write report.tsv plus figures into a directory; returns paths."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    tsv_path = directory / "report.tsv"
    tsv_path.write_text(report.to_tsv(), encoding="utf-8")
    return [tsv_path] + render_report_figures(report, directory)


def run_scenario(path: str | Path, seed: int = 0, report_dir: Optional[str | Path] = None) -> tuple[int, ScenarioReport]:
    """Execute a scenario file; exit status 0 only if every step passed."""
    text = Path(path).read_text(encoding="utf-8")
    scenario = Scenario.parse(text, seed=seed)
    report = ScenarioRunner(scenario).run()
    if report_dir is not None:
        write_report(report, report_dir)
    return (0 if report.passed else 1), report
