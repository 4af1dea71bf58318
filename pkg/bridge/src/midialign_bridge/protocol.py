"""Wire protocol v1 schemas and validation.

Request/response layouts (token wire form: ["on", pitch], ["dur", bin],
["shift", bin], ["tempo", bpm], ["bar"], ["eos"]):

    {"op": "hello"}                               -> {"version": 1, "concurrent": bool}
    {"op": "generate", "caption", "prefix",
     "n_tokens", "seed"}                          -> {"tokens": [...]}
    {"op": "mutate", "caption", "count", "seed"}  -> {"captions": [...]}
    {"op": "score", "caption", "smf_base64"}      -> {"score": number}

Any failure is {"error": code, "message": text}. Validators return an
error string or None; they never raise.
"""

from __future__ import annotations

import base64

PROTOCOL_VERSION = 1

TOKEN_KINDS = {"on": (0, 127), "dur": (0, 31), "shift": (0, 31),
               "tempo": (20, 300), "bar": None, "eos": None}

OPS = ("hello", "generate", "mutate", "score")


def validate_wire_token(obj) -> str | None:
    if not isinstance(obj, list) or not 1 <= len(obj) <= 2:
        return f"token must be a 1- or 2-element list, got {obj!r}"
    kind = obj[0]
    if kind not in TOKEN_KINDS:
        return f"unknown token kind {kind!r}"
    bounds = TOKEN_KINDS[kind]
    if bounds is None:
        if len(obj) != 1:
            return f"{kind} token carries no value"
        return None
    if len(obj) != 2 or not isinstance(obj[1], int) or isinstance(obj[1], bool):
        return f"{kind} token needs an integer value"
    lo, hi = bounds
    if not lo <= obj[1] <= hi:
        return f"{kind} value {obj[1]} outside [{lo}, {hi}]"
    return None


def _require_str(request, field) -> str | None:
    if not isinstance(request.get(field), str):
        return f"field {field!r} must be a string"
    return None


def _require_int(request, field, minimum=None) -> str | None:
    value = request.get(field)
    if not isinstance(value, int) or isinstance(value, bool):
        return f"field {field!r} must be an integer"
    if minimum is not None and value < minimum:
        return f"field {field!r} must be >= {minimum}"
    return None


def validate_request(request) -> str | None:
    """None when the request is a well-formed v1 request."""
    if not isinstance(request, dict):
        return "request must be a JSON object"
    op = request.get("op")
    if op not in OPS:
        return f"unsupported op {op!r}"
    if op == "hello":
        return None
    if op == "generate":
        for check in (_require_str(request, "caption"),
                      _require_int(request, "n_tokens", minimum=1)):
            if check:
                return check
        if "seed" in request:
            check = _require_int(request, "seed")
            if check:
                return check
        prefix = request.get("prefix", [])
        if not isinstance(prefix, list):
            return "field 'prefix' must be a list of wire tokens"
        for tok in prefix:
            check = validate_wire_token(tok)
            if check:
                return check
        return None
    if op == "mutate":
        for check in (_require_str(request, "caption"),
                      _require_int(request, "count", minimum=1)):
            if check:
                return check
        if "seed" in request:
            return _require_int(request, "seed")
        return None
    # score
    check = _require_str(request, "caption")
    if check:
        return check
    check = _require_str(request, "smf_base64")
    if check:
        return check
    try:
        base64.b64decode(request["smf_base64"], validate=True)
    except (ValueError, TypeError):
        return "field 'smf_base64' is not valid base64"
    return None


def validate_response(op: str, response) -> str | None:
    """None when the response satisfies the v1 schema for ``op``.

    Error responses are schema-valid for every op.
    """
    if not isinstance(response, dict):
        return "response must be a JSON object"
    if "error" in response:
        if not isinstance(response["error"], str):
            return "field 'error' must be a string code"
        if not isinstance(response.get("message"), str):
            return "error responses need a string 'message'"
        return None
    if op == "hello":
        if response.get("version") != PROTOCOL_VERSION:
            return f"hello must carry version {PROTOCOL_VERSION}"
        if not isinstance(response.get("concurrent"), bool):
            return "hello must carry boolean 'concurrent'"
        return None
    if op == "generate":
        tokens = response.get("tokens")
        if not isinstance(tokens, list):
            return "generate response needs a 'tokens' list"
        for tok in tokens:
            check = validate_wire_token(tok)
            if check:
                return check
        return None
    if op == "mutate":
        captions = response.get("captions")
        if not isinstance(captions, list) or \
                not all(isinstance(c, str) for c in captions):
            return "mutate response needs a list of string 'captions'"
        return None
    if op == "score":
        score = response.get("score")
        if not isinstance(score, (int, float)) or isinstance(score, bool):
            return "score response needs a numeric 'score'"
        if not -1.0 <= float(score) <= 1.0:
            return "score must lie in [-1, 1]"
        return None
    return f"unknown op {op!r}"


def error_response(code: str, message: str) -> dict:
    return {"error": code, "message": message}
