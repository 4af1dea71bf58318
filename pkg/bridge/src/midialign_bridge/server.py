"""The bridge server: wire protocol v1 over stdio or HTTP.

Models load once at startup (a load failure aborts the process with a
nonzero exit); everything after that is fail-soft: any per-request problem,
including hostile input, becomes an error response and the process keeps
serving.
"""

from __future__ import annotations

import base64
import json
import sys
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from midialign_bridge.adapter import AdapterError, native_to_wire, wire_to_native
from midialign_bridge.config import BridgeConfig
from midialign_bridge.models import load_generator, load_mutator, load_scorer
from midialign_bridge.protocol import (
    PROTOCOL_VERSION,
    error_response,
    validate_request,
)


class BridgeService:
    def __init__(self, config: BridgeConfig):
        self.config = config
        self.generator = load_generator(config)
        self.mutator = load_mutator(config)
        self.scorer = load_scorer(config)

    def handle(self, request) -> dict:
        problem = validate_request(request)
        if problem:
            return error_response("bad_request", problem)
        op = request["op"]
        try:
            if op == "hello":
                return {"version": PROTOCOL_VERSION,
                        "concurrent": self.config.concurrent}
            if op == "generate":
                return self._generate(request)
            if op == "mutate":
                return {"captions": self.mutator.mutate(
                    request["caption"], request["count"], request.get("seed", 0))}
            return self._score(request)
        except AdapterError as exc:
            return error_response("unmappable_token", str(exc))
        except Exception as exc:  # noqa: BLE001 - requests must never kill the server
            return error_response("internal", f"{type(exc).__name__}: {exc}")

    def _generate(self, request) -> dict:
        prefix = [wire_to_native(t) for t in request.get("prefix", [])]
        native = self.generator.generate(
            request["caption"], prefix, request["n_tokens"], request.get("seed", 0))
        return {"tokens": [native_to_wire(t) for t in native]}

    def _score(self, request) -> dict:
        smf = base64.b64decode(request["smf_base64"], validate=True)
        value = float(self.scorer.score(smf, request["caption"]))
        return {"score": max(-1.0, min(1.0, value))}


def _dumps(payload: dict) -> str:
    return json.dumps(payload, sort_keys=True, separators=(",", ":"))


def serve_stdio(service: BridgeService, stdin=None, stdout=None) -> None:
    stdin = stdin or sys.stdin.buffer
    stdout = stdout or sys.stdout.buffer
    for line in stdin:
        line = line.strip()
        if not line:
            continue
        try:
            request = json.loads(line)
        except (json.JSONDecodeError, UnicodeDecodeError) as exc:
            response = error_response("bad_json", str(exc))
        else:
            response = service.handle(request)
        stdout.write((_dumps(response) + "\n").encode("utf-8"))
        stdout.flush()


def make_http_server(service: BridgeService, port: int) -> ThreadingHTTPServer:
    class Handler(BaseHTTPRequestHandler):
        def do_POST(self):
            length = int(self.headers.get("Content-Length", 0))
            try:
                request = json.loads(self.rfile.read(length))
            except (json.JSONDecodeError, UnicodeDecodeError) as exc:
                response = error_response("bad_json", str(exc))
            else:
                if isinstance(request, dict):
                    request.setdefault("op", self.path.strip("/"))
                response = service.handle(request)
            payload = _dumps(response).encode("utf-8")
            self.send_response(200)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(payload)))
            self.end_headers()
            self.wfile.write(payload)

        def log_message(self, *args):
            pass

    return ThreadingHTTPServer(("127.0.0.1", port), Handler)


def serve(config: BridgeConfig) -> int:
    """Run until interrupted. Model-load failures exit nonzero."""
    from midialign_bridge.models import ModelLoadError

    try:
        service = BridgeService(config)
    except ModelLoadError as exc:
        print(f"fatal: {exc}", file=sys.stderr)
        return 1
    if config.transport == "stdio":
        serve_stdio(service)
    else:
        server = make_http_server(service, config.port)
        print(f"serving on http://127.0.0.1:{config.port}", file=sys.stderr)
        server.serve_forever()
    return 0
