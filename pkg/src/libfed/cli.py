"""Operator command line: serve a provider or the gateway, run harvests,
ingest gathered files, search, manage the registry, generate corpora and
replay scenarios.

Exit codes: 0 success, 1 operational failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import requests

from .corpus import generate_corpus, write_corpus
from .gateway import Gateway, ProviderRegistry, RegistryError
from .harvester import CheckpointStore, Harvester, HarvestScheduler, JobStore, ProviderDescriptor
from .provider import ProviderStore, RepositoryConfig
from .scenario import run_scenario
from .servers import GatewayServer, ProviderServer
from .union import UnionIndex

logger = logging.getLogger(__name__)

DEFAULT_REGISTRY = "registry.json"
DEFAULT_DATA = "union-data"
DEFAULT_GATEWAY = "http://127.0.0.1:8400"


def _load_provider_config(path: str) -> tuple[RepositoryConfig, str]:
    with open(path, "r", encoding="utf-8") as handle:
        body = json.load(handle)
    config = RepositoryConfig(
        body["repositoryId"],
        body.get("displayName", body["repositoryId"]),
        body.get("adminContact", ""),
        body.get("listenAddress", "127.0.0.1:8301"),
        int(body.get("pageSize", 100)),
        int(body.get("maxDocumentBytes", 64 * 1024 * 1024)),
    )
    data_dir = body.get("dataDir", f"{config.repository_id}-data")
    return config, data_dir


def _open_union(data_dir: str) -> tuple[UnionIndex, CheckpointStore, JobStore]:
    union = UnionIndex(data_dir)
    checkpoints = CheckpointStore(Path(data_dir) / "checkpoints.json")
    jobs = JobStore(Path(data_dir) / "jobs.jsonl")
    return union, checkpoints, jobs


def cmd_provider_serve(args) -> int:
    config, data_dir = _load_provider_config(args.config)
    store = ProviderStore(config, data_dir)
    server = ProviderServer.from_config(store)
    server.start()
    print(f"provider {config.repository_id} serving on {server.base_url}", flush=True)
    try:
        server._thread.join()
    except KeyboardInterrupt:
        pass
    finally:
        server.stop()
        store.close()
    return 0


def cmd_gateway_serve(args) -> int:
    registry = ProviderRegistry(args.registry)
    union, checkpoints, jobs = _open_union(args.data)
    harvester = Harvester(union, checkpoints, jobs)
    gateway = Gateway(registry, union)
    scheduler = None
    if args.scheduler:
        scheduler = HarvestScheduler(harvester, registry.list)
        scheduler.start()
    host, _, port = args.listen.rpartition(":")
    server = GatewayServer(
        gateway,
        harvester,
        host or "127.0.0.1",
        int(port),
        static_dir=args.static,
        scheduler=scheduler,
    )
    server.start()
    print(f"gateway serving on {server.base_url}", flush=True)
    try:
        server._thread.join()
    except KeyboardInterrupt:
        pass
    finally:
        server.stop()
        union.close()
    return 0


def cmd_harvest_run(args) -> int:
    registry = ProviderRegistry(args.registry)
    try:
        provider = registry.get(args.provider_id)
    except RegistryError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    union, checkpoints, jobs = _open_union(args.data)
    try:
        harvester = Harvester(union, checkpoints, jobs)
        job = harvester.run_full(provider) if args.full else harvester.run_incremental(provider)
        print(json.dumps(job.to_json(), indent=2))
        return 0 if job.state == "succeeded" else 1
    finally:
        union.close()


def cmd_harvest_status(args) -> int:
    data = Path(args.data)
    checkpoints = CheckpointStore(data / "checkpoints.json")
    print("checkpoints:")
    for provider_id, until in sorted(checkpoints.all().items()):
        print(f"  {provider_id}: {until}")
    history = data / "jobs.jsonl"
    print("recent jobs:")
    if history.exists():
        lines = history.read_text(encoding="utf-8").splitlines()
        for line in lines[-args.limit :]:
            job = json.loads(line)
            print(
                f"  {job['jobId']} {job['providerId']} {job['kind']} {job['state']} "
                f"counts={job['counts']}"
            )
    return 0


def cmd_ingest_files(args) -> int:
    union, checkpoints, jobs = _open_union(args.data)
    try:
        harvester = Harvester(union, checkpoints, jobs)
        job = harvester.ingest_files(args.directory, args.as_provider)
        print(json.dumps(job.to_json(), indent=2))
        return 0 if job.state == "succeeded" else 1
    finally:
        union.close()


def cmd_search(args) -> int:
    try:
        reply = requests.get(
            args.gateway.rstrip("/") + "/api/search",
            params={"q": args.query, "start": args.start, "max": args.max},
            timeout=30,
        )
    except requests.RequestException as exc:
        print(f"error: gateway unreachable: {exc}", file=sys.stderr)
        return 1
    if reply.status_code != 200:
        print(f"error: {reply.text}", file=sys.stderr)
        return 1
    body = reply.json()
    if body["partial"]:
        failed = [o["provider"] for o in body["outcomes"] if o["status"] != "ok"]
        print(f"partial results ({', '.join(failed)} unavailable)")
    for result in body["results"]:
        title = next((s["value"] for s in result["record"] if s["element"] == "title"), "(untitled)")
        sources = ", ".join(f"{s['provider']}#{s['rank']}" for s in result["sources"])
        print(f"{result['score']:.3f}  {title}  [{sources}]")
    print(f"total: {body['total']}")
    return 0


def cmd_registry(args) -> int:
    registry = ProviderRegistry(args.registry)
    try:
        if args.registry_command == "add":
            descriptor = ProviderDescriptor(
                args.provider_id,
                args.base_url,
                tuple(args.modes.split(",")),
                args.poll,
            )
            registry.add(descriptor)
            print(f"added {args.provider_id}")
        elif args.registry_command == "remove":
            registry.remove(args.provider_id)
            print(f"removed {args.provider_id}")
        else:
            for provider in registry.list():
                print(json.dumps(provider.to_json()))
    except (RegistryError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


def cmd_scenario_run(args) -> int:
    try:
        status, report = run_scenario(args.file, seed=args.seed, report_dir=args.report_dir)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(report.to_text())
    if args.report_dir:
        print(f"report written to {args.report_dir}")
    return status


def cmd_corpus_gen(args) -> int:
    records = generate_corpus(args.seed, args.n)
    written = write_corpus(records, args.out)
    print(f"wrote {len(written)} records to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="libfed", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    provider = sub.add_parser("provider", help="data provider commands")
    provider_sub = provider.add_subparsers(dest="provider_command", required=True)
    serve = provider_sub.add_parser("serve", help="run a repository server")
    serve.add_argument("--config", required=True, help="provider config JSON")
    serve.set_defaults(func=cmd_provider_serve)

    gateway = sub.add_parser("gateway", help="gateway commands")
    gateway_sub = gateway.add_subparsers(dest="gateway_command", required=True)
    gserve = gateway_sub.add_parser("serve", help="run the gateway")
    gserve.add_argument("--registry", default=DEFAULT_REGISTRY)
    gserve.add_argument("--data", default=DEFAULT_DATA, help="union index directory")
    gserve.add_argument("--listen", default="127.0.0.1:8400")
    gserve.add_argument("--static", default=None, help="serve the web portal from this directory")
    gserve.add_argument(
        "--no-scheduler", dest="scheduler", action="store_false",
        help="disable periodic harvesting",
    )
    gserve.set_defaults(func=cmd_gateway_serve, scheduler=True)

    harvest = sub.add_parser("harvest", help="harvester commands")
    harvest_sub = harvest.add_subparsers(dest="harvest_command", required=True)
    hrun = harvest_sub.add_parser("run", help="harvest one provider now")
    hrun.add_argument("provider_id")
    hrun.add_argument("--full", action="store_true", help="ignore the checkpoint")
    hrun.add_argument("--registry", default=DEFAULT_REGISTRY)
    hrun.add_argument("--data", default=DEFAULT_DATA)
    hrun.set_defaults(func=cmd_harvest_run)
    hstatus = harvest_sub.add_parser("status", help="checkpoints and job history")
    hstatus.add_argument("--data", default=DEFAULT_DATA)
    hstatus.add_argument("--limit", type=int, default=20)
    hstatus.set_defaults(func=cmd_harvest_status)

    ingest = sub.add_parser("ingest-files", help="ingest gathered HTML/text files")
    ingest.add_argument("directory")
    ingest.add_argument("--as", dest="as_provider", required=True, metavar="PROVIDER_ID")
    ingest.add_argument("--data", default=DEFAULT_DATA)
    ingest.set_defaults(func=cmd_ingest_files)

    search = sub.add_parser("search", help="query a running gateway")
    search.add_argument("query")
    search.add_argument("--start", type=int, default=0)
    search.add_argument("--max", type=int, default=10)
    search.add_argument("--gateway", default=DEFAULT_GATEWAY)
    search.set_defaults(func=cmd_search)

    registry = sub.add_parser("registry", help="edit the provider registry file")
    registry_sub = registry.add_subparsers(dest="registry_command", required=True)
    radd = registry_sub.add_parser("add")
    radd.add_argument("provider_id")
    radd.add_argument("--base-url", required=True)
    radd.add_argument("--modes", default="harvest,search")
    radd.add_argument("--poll", type=int, default=3600)
    radd.add_argument("--registry", default=DEFAULT_REGISTRY)
    radd.set_defaults(func=cmd_registry)
    rremove = registry_sub.add_parser("remove")
    rremove.add_argument("provider_id")
    rremove.add_argument("--registry", default=DEFAULT_REGISTRY)
    rremove.set_defaults(func=cmd_registry)
    rlist = registry_sub.add_parser("list")
    rlist.add_argument("--registry", default=DEFAULT_REGISTRY)
    rlist.set_defaults(func=cmd_registry)

    scenario = sub.add_parser("scenario", help="simulation scenarios")
    scenario_sub = scenario.add_subparsers(dest="scenario_command", required=True)
    srun = scenario_sub.add_parser("run")
    srun.add_argument("file")
    srun.add_argument("--seed", type=int, default=0)
    srun.add_argument("--report-dir", default=None, help="write report.tsv and figures here")
    srun.set_defaults(func=cmd_scenario_run)

    corpus = sub.add_parser("corpus", help="synthetic corpora")
    corpus_sub = corpus.add_subparsers(dest="corpus_command", required=True)
    cgen = corpus_sub.add_parser("gen")
    cgen.add_argument("--seed", type=int, required=True)
    cgen.add_argument("--n", type=int, required=True)
    cgen.add_argument("--out", required=True)
    cgen.set_defaults(func=cmd_corpus_gen)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(asctime)s %(name)s %(levelname)s %(message)s",
    )
    try:
        return args.func(args)
    except KeyboardInterrupt:
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
