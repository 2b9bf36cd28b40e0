"""Minimal JSON-over-HTTP endpoint exposing parse to external programs.

POST /v1/parse takes {"command": str, "page_id": str} and returns the
same prediction JSON the CLI emits, plus latency_ms and a version field.
GET /v1/health reports readiness. The loaded bundle is immutable, so the
threading server handles concurrent requests without locks.
"""

from __future__ import annotations

import json
import logging
import time
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from . import __version__
from .inference import prediction_to_dict
from .orchestrator import ModelBundle
from .schema import SiteSchema, UnknownPageError

logger = logging.getLogger(__name__)


class ParseHTTPServer(ThreadingHTTPServer):
    daemon_threads = True
    request_queue_size = 128  # bursts of concurrent clients must not be reset

    def __init__(self, address: tuple[str, int],
                 bundle: ModelBundle | None, schema: SiteSchema):
        super().__init__(address, _Handler)
        self.bundle = bundle
        self.schema = schema


class _Handler(BaseHTTPRequestHandler):
    server: ParseHTTPServer

    def log_message(self, fmt, *args):  # route through logging, not stderr
        logger.debug("%s " + fmt, self.address_string(), *args)

    def _respond(self, status: int, payload: dict) -> None:
        body = json.dumps(payload, ensure_ascii=False).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def do_GET(self):
        if self.path != "/v1/health":
            self._respond(404, {"error": "unknown path"})
            return
        if self.server.bundle is None:
            self._respond(503, {"status": "loading"})
            return
        self._respond(200, {"status": "ok", "version": __version__})

    def do_POST(self):
        if self.path != "/v1/parse":
            self._respond(404, {"error": "unknown path"})
            return
        if self.server.bundle is None:
            self._respond(503, {"error": "models not loaded"})
            return
        try:
            length = int(self.headers.get("Content-Length", "0"))
            request = json.loads(self.rfile.read(length))
            command = request["command"]
            page_id = request["page_id"]
            if not isinstance(command, str) or not isinstance(page_id, str):
                raise TypeError("command and page_id must be strings")
            if not command.strip():
                raise ValueError("command must be non-empty")
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            self._respond(400, {"error": f"malformed request: {exc}"})
            return
        started = time.perf_counter()
        try:
            prediction = self.server.bundle.parse(self.server.schema,
                                                  page_id, command)
        except UnknownPageError:
            self._respond(404, {"error": f"unknown page id {page_id!r}"})
            return
        payload = prediction_to_dict(command, page_id, prediction)
        payload["latency_ms"] = (time.perf_counter() - started) * 1000.0
        payload["version"] = __version__
        self._respond(200, payload)


def serve(bundle: ModelBundle, schema: SiteSchema, port: int,
          host: str = "127.0.0.1") -> ParseHTTPServer:
    """Create (but do not start) the server; callers run serve_forever()."""
    return ParseHTTPServer((host, port), bundle, schema)
