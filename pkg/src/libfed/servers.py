"""HTTP shells over the provider store and the gateway.

Provider endpoints:
  GET  /oai?verb=...                     harvest protocol
  POST /search    {"query","start","max"}
  POST /submit    multipart: metadata (JSON), optional document
  GET  /documents/<localId>

Gateway endpoints:
  POST /search                            union index, same shape as a provider
  GET  /api/search?q=&start=&max=
  GET/POST /api/providers, DELETE /api/providers/<id>
  POST /api/harvest/<id>/run?kind=full|incremental
  GET  /api/harvest/jobs, GET /api/checkpoints
  static files (the web portal) from an optional directory

Both servers are threaded so a gateway request can fan out to providers
(or to itself) without deadlocking.
"""

from __future__ import annotations

import json
import logging
import re
import threading
import time
from email.parser import BytesParser
from email.policy import default as email_policy
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from typing import Callable, Optional
from urllib.parse import parse_qs, urlparse

from .datestamp import DatestampError, parse_datestamp, render_datestamp, utcnow
from .harvest import HarvestRequest, error_response, handle_request
from .harvester import Harvester, HarvestScheduler
from .gateway import Gateway, ProviderRegistry, RegistryError
from .harvester import ProviderDescriptor
from .jsonio import record_from_json, record_to_json
from .provider import (
    ClockSkewError,
    DeletedItemError,
    ProviderStore,
    SubmissionInvalid,
    UnknownIdentifierError,
)
from .query import QuerySyntaxError

__all__ = ["ProviderServer", "GatewayServer", "parse_multipart"]

logger = logging.getLogger(__name__)


def parse_multipart(content_type: str, body: bytes) -> dict[str, tuple[bytes, str]]:
    """Part name -> (payload, content type). Raises ValueError when the
    body is not multipart/form-data."""
    if "multipart/form-data" not in content_type:
        raise ValueError("expected multipart/form-data")
    message = BytesParser(policy=email_policy).parsebytes(
        b"Content-Type: " + content_type.encode("ascii") + b"\r\n\r\n" + body
    )
    if not message.is_multipart():
        raise ValueError("unparseable multipart body")
    parts = {}
    for part in message.iter_parts():
        name = part.get_param("name", header="content-disposition")
        if not name:
            continue
        payload = part.get_payload(decode=True) or b""
        parts[name] = (payload, part.get_content_type())
    return parts


class _Handler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"
    server_version = "libfed"

    def log_message(self, format, *args):  # noqa: A002 - stdlib signature
        logger.debug("%s - %s", self.address_string(), format % args)

    def _body(self) -> bytes:
        length = int(self.headers.get("Content-Length", 0) or 0)
        return self.rfile.read(length) if length else b""

    def _respond(self, status: int, payload: bytes, content_type: str) -> None:
        self.send_response(status)
        self.send_header("Content-Type", content_type)
        self.send_header("Content-Length", str(len(payload)))
        self.send_header("Access-Control-Allow-Origin", "*")
        self.end_headers()
        self.wfile.write(payload)

    def respond_json(self, status: int, document) -> None:
        payload = json.dumps(document, ensure_ascii=False).encode("utf-8")
        self._respond(status, payload, "application/json; charset=utf-8")

    def respond_xml(self, payload: bytes) -> None:
        self._respond(200, payload, "application/xml; charset=utf-8")

    def respond_error(self, status: int, message: str, **extra) -> None:
        self.respond_json(status, {"error": message, **extra})


class _Server(ThreadingHTTPServer):
    daemon_threads = True
    allow_reuse_address = True


class _BaseServer:
    """start/stop lifecycle around a ThreadingHTTPServer."""

    def __init__(self, host: str, port: int, handler_class):
        self._httpd = _Server((host, port), handler_class)
        self._thread: Optional[threading.Thread] = None

    @property
    def host(self) -> str:
        return self._httpd.server_address[0]

    @property
    def port(self) -> int:
        return self._httpd.server_address[1]

    @property
    def base_url(self) -> str:
        return f"http://{self.host}:{self.port}"

    def start(self) -> None:
        if self._thread is not None:
            return
        self._thread = threading.Thread(target=self._httpd.serve_forever, daemon=True)
        self._thread.start()

    def serve_forever(self) -> None:
        self._httpd.serve_forever()

    def stop(self) -> None:
        self._httpd.shutdown()
        self._httpd.server_close()
        if self._thread is not None:
            self._thread.join(timeout=5)
            self._thread = None


def _parse_listen(address: str) -> tuple[str, int]:
    host, _, port = address.rpartition(":")
    return host or "127.0.0.1", int(port)


# --- provider -------------------------------------------------------------


class ProviderServer(_BaseServer):
    def __init__(self, store: ProviderStore, host: str = "127.0.0.1", port: int = 0):
        self.store = store
        # fault-injection hooks for the simulation harness: seconds to
        # stall before answering /search or each /oai page
        self.search_delay_seconds = 0.0
        self.oai_delay_seconds = 0.0

        server = self

        class Handler(_Handler):
            def do_GET(self):
                url = urlparse(self.path)
                if url.path == "/oai":
                    server._handle_oai(self, url)
                elif url.path.startswith("/documents/"):
                    server._handle_document(self, url.path)
                else:
                    self.respond_error(404, "not found")

            def do_POST(self):
                url = urlparse(self.path)
                if url.path == "/search":
                    server._handle_search(self)
                elif url.path == "/submit":
                    server._handle_submit(self)
                else:
                    self.respond_error(404, "not found")

        super().__init__(host, port, Handler)

    @classmethod
    def from_config(cls, store: ProviderStore) -> "ProviderServer":
        host, port = _parse_listen(store.config.listen_address)
        return cls(store, host, port)

    def _handle_oai(self, handler: _Handler, url) -> None:
        if self.oai_delay_seconds:
            time.sleep(self.oai_delay_seconds)
        params = {key: values[0] for key, values in parse_qs(url.query).items()}
        verb = params.pop("verb", "")
        try:
            from_ = parse_datestamp(params.pop("from")) if "from" in params else None
            until = parse_datestamp(params.pop("until")) if "until" in params else None
        except DatestampError as exc:
            request = HarvestRequest(verb or "?")
            handler.respond_xml(error_response(request, utcnow(), "badArgument", str(exc)))
            return
        request = HarvestRequest(
            verb=verb,
            identifier=params.pop("identifier", None),
            from_=from_,
            until=until,
            resumption_token=params.pop("resumptionToken", None),
        )
        if params:
            handler.respond_xml(
                error_response(request, utcnow(), "badArgument", f"unknown arguments: {sorted(params)}")
            )
            return
        payload = handle_request(self.store.snapshot_wire(), self.store.config.info(), request, utcnow())
        handler.respond_xml(payload)

    def _handle_search(self, handler: _Handler) -> None:
        if self.search_delay_seconds:
            time.sleep(self.search_delay_seconds)
        try:
            body = json.loads(handler._body() or b"{}")
            query = body["query"]
            start = int(body.get("start", 0))
            max_results = int(body.get("max", 10))
        except (ValueError, KeyError, TypeError):
            handler.respond_error(400, "request body must carry query/start/max")
            return
        try:
            total, items = self.store.search_items(query, start, max_results)
        except QuerySyntaxError as exc:
            handler.respond_error(400, exc.message, offset=exc.offset)
            return
        except ValueError as exc:
            handler.respond_error(400, str(exc))
            return
        records = [
            {
                "identifier": item.header.identifier,
                "datestamp": render_datestamp(item.header.datestamp),
                "metadata": record_to_json(item.record),
            }
            for item in items
        ]
        handler.respond_json(
            200,
            {"provider": self.store.config.repository_id, "total": total, "records": records},
        )

    def _handle_submit(self, handler: _Handler) -> None:
        try:
            parts = parse_multipart(handler.headers.get("Content-Type", ""), handler._body())
        except ValueError as exc:
            handler.respond_error(400, str(exc))
            return
        if "metadata" not in parts:
            handler.respond_error(400, "missing metadata part")
            return
        try:
            metadata = json.loads(parts["metadata"][0])
            kind = metadata["kind"]
            record = record_from_json(metadata["metadata"])
        except (ValueError, KeyError, TypeError) as exc:
            handler.respond_error(400, f"unparseable metadata part: {exc}")
            return
        document, media_type = None, "application/octet-stream"
        if "document" in parts:
            document, media_type = parts["document"]
        try:
            identifier = self.store.submit(
                record, kind, utcnow(), document=document, media_type=media_type
            )
        except SubmissionInvalid as exc:
            handler.respond_json(400, {"error": "validation failed", "violations": exc.violations})
            return
        handler.respond_json(201, {"identifier": identifier})

    def _handle_document(self, handler: _Handler, path: str) -> None:
        match = re.match(r"^/documents/(\d+)$", path)
        if not match:
            handler.respond_error(404, "not found")
            return
        try:
            payload, media_type = self.store.document(int(match.group(1)))
        except UnknownIdentifierError:
            handler.respond_error(404, "no such document")
            return
        handler._respond(200, payload, media_type)


# --- gateway ----------------------------------------------------------------


_STATIC_TYPES = {
    ".html": "text/html; charset=utf-8",
    ".js": "text/javascript; charset=utf-8",
    ".mjs": "text/javascript; charset=utf-8",
    ".css": "text/css; charset=utf-8",
    ".json": "application/json",
    ".svg": "image/svg+xml",
    ".png": "image/png",
    ".ico": "image/x-icon",
}


class GatewayServer(_BaseServer):
    def __init__(
        self,
        gateway: Gateway,
        harvester: Harvester,
        host: str = "127.0.0.1",
        port: int = 0,
        static_dir: Optional[str | Path] = None,
        scheduler: Optional[HarvestScheduler] = None,
    ):
        self.gateway = gateway
        self.harvester = harvester
        self.static_dir = Path(static_dir).resolve() if static_dir else None
        self.scheduler = scheduler

        server = self

        class Handler(_Handler):
            def do_GET(self):
                url = urlparse(self.path)
                if url.path == "/api/search":
                    server._handle_unified_search(self, url)
                elif url.path == "/api/providers":
                    self.respond_json(
                        200,
                        {"providers": [p.to_json() for p in server.gateway.registry.list()]},
                    )
                elif url.path == "/api/harvest/jobs":
                    jobs = [j.to_json() for j in server.harvester.jobs.jobs()]
                    self.respond_json(200, {"jobs": list(reversed(jobs))})
                elif url.path == "/api/checkpoints":
                    self.respond_json(200, {"checkpoints": server.harvester.checkpoints.all()})
                else:
                    server._handle_static(self, url.path)

            def do_POST(self):
                url = urlparse(self.path)
                if url.path == "/search":
                    server._handle_union_search(self)
                elif url.path == "/api/providers":
                    server._handle_registry_add(self)
                else:
                    match = re.match(r"^/api/harvest/([^/]+)/run$", url.path)
                    if match:
                        server._handle_harvest_run(self, match.group(1), url)
                    else:
                        self.respond_error(404, "not found")

            def do_DELETE(self):
                url = urlparse(self.path)
                match = re.match(r"^/api/providers/([^/]+)$", url.path)
                if match:
                    server._handle_registry_remove(self, match.group(1))
                else:
                    self.respond_error(404, "not found")

        super().__init__(host, port, Handler)

    def stop(self) -> None:
        if self.scheduler is not None:
            self.scheduler.stop()
        super().stop()

    def _handle_union_search(self, handler: _Handler) -> None:
        try:
            body = json.loads(handler._body() or b"{}")
            query = body["query"]
            start = int(body.get("start", 0))
            max_results = int(body.get("max", 10))
        except (ValueError, KeyError, TypeError):
            handler.respond_error(400, "request body must carry query/start/max")
            return
        try:
            total, hits = self.gateway.union_index.query(query, start, max_results)
        except QuerySyntaxError as exc:
            handler.respond_error(400, exc.message, offset=exc.offset)
            return
        except ValueError as exc:
            handler.respond_error(400, str(exc))
            return
        records = []
        for provider_id, identifier, score, record in hits:
            entry = self.gateway.union_index.get(provider_id, identifier)
            records.append(
                {
                    "identifier": identifier,
                    "datestamp": render_datestamp(entry.header.datestamp),
                    "metadata": record_to_json(record),
                    "score": score,
                }
            )
        handler.respond_json(200, {"provider": "union", "total": total, "records": records})

    def _handle_unified_search(self, handler: _Handler, url) -> None:
        params = {key: values[0] for key, values in parse_qs(url.query).items()}
        query = params.get("q", "")
        try:
            start = int(params.get("start", 0))
            max_results = int(params.get("max", 10))
        except ValueError:
            handler.respond_error(400, "start/max must be integers")
            return
        try:
            response = self.gateway.unified_search(query, start, max_results)
        except QuerySyntaxError as exc:
            handler.respond_error(400, exc.message, offset=exc.offset)
            return
        except ValueError as exc:
            handler.respond_error(400, str(exc))
            return
        handler.respond_json(200, response.to_json())

    def _handle_registry_add(self, handler: _Handler) -> None:
        try:
            descriptor = ProviderDescriptor.from_json(json.loads(handler._body()))
        except (ValueError, KeyError, TypeError) as exc:
            handler.respond_error(400, f"unparseable provider descriptor: {exc}")
            return
        try:
            self.gateway.registry.add(descriptor)
        except RegistryError as exc:
            handler.respond_error(409, str(exc))
            return
        handler.respond_json(201, descriptor.to_json())

    def _handle_registry_remove(self, handler: _Handler, provider_id: str) -> None:
        try:
            self.gateway.registry.remove(provider_id)
        except RegistryError as exc:
            handler.respond_error(404, str(exc))
            return
        handler.respond_json(200, {"removed": provider_id})

    def _handle_harvest_run(self, handler: _Handler, provider_id: str, url) -> None:
        params = {key: values[0] for key, values in parse_qs(url.query).items()}
        kind = params.get("kind", "incremental")
        if kind not in ("full", "incremental"):
            handler.respond_error(400, f"unknown harvest kind {kind!r}")
            return
        try:
            provider = self.gateway.registry.get(provider_id)
        except RegistryError as exc:
            handler.respond_error(404, str(exc))
            return
        if "harvest" not in provider.modes:
            handler.respond_error(400, f"provider {provider_id!r} has no harvest mode")
            return
        job = self.harvester.run_async(provider, kind)
        handler.respond_json(202, job.to_json())

    def _handle_static(self, handler: _Handler, path: str) -> None:
        if self.static_dir is None:
            handler.respond_error(404, "not found")
            return
        relative = path.lstrip("/") or "index.html"
        target = (self.static_dir / relative).resolve()
        if not target.is_relative_to(self.static_dir) or not target.is_file():
            handler.respond_error(404, "not found")
            return
        media_type = _STATIC_TYPES.get(target.suffix.lower(), "application/octet-stream")
        handler._respond(200, target.read_bytes(), media_type)
