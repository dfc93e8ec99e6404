"""Minimal JSON-over-HTTP front end.

POST /v1/couplet   {"input": "<4 characters>"}
GET  /v1/health
"""

from __future__ import annotations

import json
import logging
from http import HTTPStatus
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from .heads import INPUT_LENGTH
from .pipeline import GenerationError, Pipeline

log = logging.getLogger(__name__)

MAX_BODY = 64 * 1024


def handle_couplet(pipeline: Pipeline, body: bytes) -> tuple[int, dict]:
    try:
        payload = json.loads(body.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        return 400, {"error": f"malformed JSON: {exc}"}
    if not isinstance(payload, dict) or not isinstance(payload.get("input"), str):
        return 400, {"error": 'expected an object {"input": "<4 characters>"}'}
    text = payload["input"].strip()
    if len(text) != INPUT_LENGTH:
        return 400, {"error": f"input must be exactly {INPUT_LENGTH} characters, got {len(text)}"}
    try:
        result = pipeline.run_generate(text)
    except GenerationError as exc:
        return 500, {"error": str(exc), "stage": exc.stage}
    except ValueError as exc:
        return 400, {"error": str(exc)}
    return 200, result.to_dict()


def handle_health(pipeline: Pipeline) -> tuple[int, dict]:
    return 200, {"status": "ok", "models": dict(sorted(pipeline.model_ids.items()))}


class CoupletHandler(BaseHTTPRequestHandler):
    pipeline: Pipeline  # set on the subclass built by make_server

    def _send(self, status: int, body: dict) -> None:
        data = json.dumps(body, ensure_ascii=False, sort_keys=True).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json; charset=utf-8")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def do_GET(self):
        if self.path == "/v1/health":
            self._send(*handle_health(self.pipeline))
        else:
            self._send(404, {"error": f"no route {self.path}"})

    def do_POST(self):
        if self.path != "/v1/couplet":
            self._send(404, {"error": f"no route {self.path}"})
            return
        length = int(self.headers.get("Content-Length") or 0)
        if length > MAX_BODY:
            self._send(HTTPStatus.REQUEST_ENTITY_TOO_LARGE, {"error": "request body too large"})
            return
        self._send(*handle_couplet(self.pipeline, self.rfile.read(length)))

    def log_message(self, fmt, *args):
        log.info("%s - %s", self.address_string(), fmt % args)


def make_server(pipeline: Pipeline, host: str = "127.0.0.1", port: int = 8000) -> ThreadingHTTPServer:
    handler = type("BoundCoupletHandler", (CoupletHandler,), {"pipeline": pipeline})
    return ThreadingHTTPServer((host, port), handler)


def serve(pipeline: Pipeline, host: str = "127.0.0.1", port: int = 8000) -> None:
    server = make_server(pipeline, host, port)
    log.info("serving on http://%s:%d", *server.server_address[:2])
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
