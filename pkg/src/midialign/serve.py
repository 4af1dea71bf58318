"""Serve the built-in backends over wire protocol v1.

Useful for exercising the remote-client path end to end and as a template
for real model bridges: one JSON object per line on stdio, or HTTP POST to
/hello, /generate, /mutate, /score. Malformed input gets an error response,
never a crash.
"""

from __future__ import annotations

import argparse
import base64
import json
import sys
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from midialign.backends import (
    PROTOCOL_VERSION,
    GeneratorRequest,
    MutationRequest,
    RuleMutator,
    ToyGenerator,
)
from midialign.midi.tokens import token_from_wire, token_to_wire
from midialign.rewards import MockScorer


def _error(code: str, message: str) -> dict:
    return {"error": code, "message": message}


class BuiltinService:
    """Dispatches protocol requests onto the built-in backends."""

    def __init__(self, epsilon: float = 0.15, concurrent: bool = False):
        self.generator = ToyGenerator(epsilon=epsilon)
        self.mutator = RuleMutator()
        self.scorer = MockScorer()
        self.concurrent = concurrent

    def handle(self, request) -> dict:
        if not isinstance(request, dict):
            return _error("bad_request", "request must be a JSON object")
        op = request.get("op")
        try:
            if op == "hello":
                return {"version": PROTOCOL_VERSION, "concurrent": self.concurrent}
            if op == "generate":
                return self._generate(request)
            if op == "mutate":
                return self._mutate(request)
            if op == "score":
                return self._score(request)
            return _error("unknown_op", f"unsupported op {op!r}")
        except (KeyError, TypeError, ValueError) as exc:
            return _error("bad_request", str(exc))

    def _generate(self, request) -> dict:
        prefix = tuple(token_from_wire(t) for t in request.get("prefix", []))
        req = GeneratorRequest(
            caption=str(request["caption"]),
            prefix=prefix,
            n_tokens=int(request["n_tokens"]),
            seed=int(request.get("seed", 0)),
        )
        tokens = self.generator.generate(req)
        return {"tokens": [token_to_wire(t) for t in tokens]}

    def _mutate(self, request) -> dict:
        req = MutationRequest(
            caption=str(request["caption"]),
            count=int(request["count"]),
            seed=int(request.get("seed", 0)),
        )
        return {"captions": self.mutator.mutate(req)}

    def _score(self, request) -> dict:
        smf = base64.b64decode(str(request["smf_base64"]), validate=True)
        score = self.scorer.score(smf, str(request["caption"]))
        return {"score": score}


def _dumps(payload: dict) -> str:
    return json.dumps(payload, sort_keys=True, separators=(",", ":"))


def serve_stdio(service: BuiltinService, stdin=None, stdout=None) -> None:
    """Answer one request per line until EOF."""
    stdin = stdin or sys.stdin.buffer
    stdout = stdout or sys.stdout.buffer
    for line in stdin:
        line = line.strip()
        if not line:
            continue
        try:
            request = json.loads(line)
        except json.JSONDecodeError as exc:
            response = _error("bad_json", str(exc))
        else:
            response = service.handle(request)
        stdout.write((_dumps(response) + "\n").encode("utf-8"))
        stdout.flush()


def make_http_server(service: BuiltinService, port: int) -> ThreadingHTTPServer:
    class Handler(BaseHTTPRequestHandler):
        def do_POST(self):
            length = int(self.headers.get("Content-Length", 0))
            body = self.rfile.read(length)
            try:
                request = json.loads(body)
            except json.JSONDecodeError as exc:
                response = _error("bad_json", str(exc))
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


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        description="Serve the built-in backends over wire protocol v1")
    parser.add_argument("--stdio", action="store_true", help="serve on stdin/stdout")
    parser.add_argument("--port", type=int, help="serve HTTP on this port")
    parser.add_argument("--epsilon", type=float, default=0.15,
                        help="toy generator off-key rate")
    args = parser.parse_args(argv)
    if not args.stdio and args.port is None:
        parser.error("pick --stdio or --port")
    service = BuiltinService(epsilon=args.epsilon, concurrent=args.port is not None)
    if args.stdio:
        serve_stdio(service)
    else:
        server = make_http_server(service, args.port)
        print(f"serving on http://127.0.0.1:{args.port}", file=sys.stderr)
        server.serve_forever()
    return 0


if __name__ == "__main__":
    sys.exit(main())
