"""Pluggable model backends: generator, caption mutator, and scorer.

Each backend kind has a deterministic built-in implementation (usable fully
offline) and a remote client speaking wire protocol v1: one JSON object per
line over the stdio of a spawned subprocess, or HTTP POST to /generate,
/mutate, /score. Requests are discriminated by an "op" field; byte payloads
travel base64-encoded.
"""

from __future__ import annotations

import base64
import itertools
import json
import logging
import random
import re
import select
import shlex
import subprocess
import threading
from dataclasses import dataclass, field

import requests as _requests

from midialign.midi.features import KK_MAJOR, KK_MINOR, MAJOR, Key
from midialign.midi.tokens import (
    DEFAULT_PPQ,
    EIGHTH_BIN,
    HALF_BIN,
    QUARTER_BIN,
    Token,
    duration,
    nearest_duration_bin,
    note_on,
    tempo,
    time_shift,
    token_from_wire,
    token_to_wire,
    EOS,
)
from midialign.rewards import CaptionAttributes, parse_caption
from midialign.seeding import derive_seed

logger = logging.getLogger(__name__)

PROTOCOL_VERSION = 1


@dataclass(frozen=True)
class GeneratorRequest:
    """One continuation request against the generator backend."""

    caption: str
    prefix: tuple[Token, ...] = ()
    n_tokens: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.n_tokens < 1:
            raise ValueError(f"n_tokens must be >= 1, got {self.n_tokens}")
        object.__setattr__(self, "prefix", tuple(self.prefix))


@dataclass(frozen=True)
class MutationRequest:
    """Request for ``count`` caption variations."""

    caption: str
    count: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.count < 1:
            raise ValueError(f"count must be >= 1, got {self.count}")


# ---------------------------------------------------------------------------
# built-in generator


class ToyGenerator:
    """Offline stand-in for a text-to-MIDI model.

    Emits a tempo token first (the caption's tempo or 120, perturbed by up
    to +-10 bpm with probability 0.3), then note groups of
    note-on / duration / time-shift. Pitches come from the caption key's
    scale across MIDI octaves 3-6 with probability 1 - epsilon and from the
    off-key pitches of the same range otherwise, so the expected off-key
    fraction equals epsilon. Scale tones are weighted by the consonance
    profile of their degree (tonic heaviest), as real tonal music is, so the
    realized music actually estimates to the caption's key. Time shifts
    realize the caption's density (default 2 notes per beat); durations are
    eighth/quarter/half.

    The token stream is a pure function of (seed, caption attributes); a
    continuation request just slices it at the prefix length, so results
    are independent of how generation is chunked.
    """

    concurrent = True

    _DURATION_BINS = (EIGHTH_BIN, QUARTER_BIN, HALF_BIN)
    _TEMPO_JITTER_PROB = 0.3
    _LOW_PITCH = 48   # C3
    _HIGH_PITCH = 96  # up to B6

    def __init__(self, epsilon: float = 0.15, ppq: int = DEFAULT_PPQ,
                 stream_len: int | None = None):
        if not 0.0 <= epsilon <= 1.0:
            raise ValueError(f"epsilon {epsilon} outside [0, 1]")
        self.epsilon = epsilon
        self.ppq = ppq
        self.stream_len = stream_len

    def generate(self, req: GeneratorRequest) -> list[Token]:
        attrs = parse_caption(req.caption)
        start = len(req.prefix)
        out: list[Token] = []
        for pos, tok in enumerate(self._stream(attrs, req.seed)):
            if pos < start:
                continue
            if pos >= start + req.n_tokens:
                break
            out.append(tok)
            if tok is EOS:
                break
        return out

    def _stream(self, attrs: CaptionAttributes, seed: int):
        rng = random.Random(seed)
        bpm = attrs.tempo_bpm or 120
        if rng.random() < self._TEMPO_JITTER_PROB:
            bpm = min(300, max(20, bpm + rng.randint(-10, 10)))
        key = attrs.key or Key(0, MAJOR)
        diatonic = key.pitch_classes()
        profile = KK_MAJOR if key.mode == MAJOR else KK_MINOR
        pitch_range = range(self._LOW_PITCH, self._HIGH_PITCH)
        in_key = [p for p in pitch_range if p % 12 in diatonic]
        in_key_weights = [float(profile[(p - key.tonic) % 12]) for p in in_key]
        cum_weights = list(itertools.accumulate(in_key_weights))
        off_key = [p for p in pitch_range if p % 12 not in diatonic]
        density = attrs.density or 2.0
        shift_bin = nearest_duration_bin(max(1, round(self.ppq / density)), self.ppq)

        emitted = 0

        def cap(tok: Token):
            nonlocal emitted
            emitted += 1
            return tok

        yield cap(tempo(bpm))
        while self.stream_len is None or emitted < self.stream_len:
            if rng.random() < self.epsilon:
                pitch = rng.choice(off_key)
            else:
                pitch = rng.choices(in_key, cum_weights=cum_weights)[0]
            for tok in (note_on(pitch), duration(rng.choice(self._DURATION_BINS)),
                        time_shift(shift_bin)):
                if self.stream_len is not None and emitted >= self.stream_len:
                    break
                yield cap(tok)
        yield EOS


# ---------------------------------------------------------------------------
# built-in mutator


class RuleMutator:
    """Seeded caption paraphraser that never touches hard attributes.

    Three operations: adjective substitution from a fixed synonym lexicon,
    clause rotation, and appending one neutral descriptor phrase. None of
    the lexicon entries or phrases contain key, tempo, or density words, and
    every candidate is re-parsed to confirm the original's key and tempo
    survived; a candidate that fails falls back to original + phrase.
    """

    SYNONYMS = {
        "melodic": "tuneful", "tuneful": "melodic",
        "warm": "mellow", "mellow": "warm",
        "cheerful": "joyful", "joyful": "cheerful",
        "dark": "shadowy", "shadowy": "dark",
        "gentle": "tender", "tender": "gentle",
        "ambient": "atmospheric", "atmospheric": "ambient",
        "lively": "vibrant", "vibrant": "lively",
        "upbeat": "bright", "bright": "upbeat",
        "relaxing": "calming", "calming": "relaxing",
        "energetic": "spirited", "spirited": "energetic",
    }

    PHRASES = (
        "with a gentle sway",
        "carrying a subtle pulse",
        "with understated dynamics",
        "evoking wide open space",
        "with a hint of nostalgia",
        "carried by a steady groove",
        "with delicate ornamentation",
        "shaded with quiet intensity",
    )

    def mutate(self, req: MutationRequest) -> list[str]:
        original = req.caption
        orig_attrs = parse_caption(original)
        out: list[str] = []
        seen = {original}
        for i in range(req.count):
            rng = random.Random(derive_seed(req.seed, "mutation", i))
            candidate = self._swap_adjectives(original, rng)
            if rng.random() < 0.4:
                candidate = self._rotate_clauses(candidate, rng)
            candidate = self._append_phrase(candidate, rng)
            candidate = self._repair(candidate, original, orig_attrs, seen, rng)
            seen.add(candidate)
            out.append(candidate)
        return out

    def _repair(self, candidate: str, original: str, orig_attrs: CaptionAttributes,
                seen: set[str], rng: random.Random) -> str:
        """Force attribute preservation and distinctness; phrases accumulate
        until the candidate is unique, so this always terminates."""
        attrs = parse_caption(candidate)
        if attrs.key != orig_attrs.key or attrs.tempo_bpm != orig_attrs.tempo_bpm:
            candidate = self._append_phrase(original, rng)
        while candidate in seen:
            candidate = self._append_phrase(candidate, rng)
        return candidate

    def _swap_adjectives(self, text: str, rng: random.Random) -> str:
        for word in sorted(self.SYNONYMS):
            if rng.random() >= 0.5:
                continue
            replacement = self.SYNONYMS[word]

            def swap(match: re.Match) -> str:
                hit = match.group(0)
                return replacement.capitalize() if hit[0].isupper() else replacement

            text = re.sub(rf"\b{word}\b", swap, text, flags=re.IGNORECASE)
        return text

    @staticmethod
    def _rotate_clauses(text: str, rng: random.Random) -> str:
        trailing = "."
        body = text
        if body.endswith("."):
            body = body[:-1]
        else:
            trailing = ""
        clauses = body.split(", ")
        if len(clauses) < 2:
            return text
        k = rng.randrange(1, len(clauses))
        return ", ".join(clauses[k:] + clauses[:k]) + trailing

    def _append_phrase(self, text: str, rng: random.Random) -> str:
        phrase = self.PHRASES[rng.randrange(len(self.PHRASES))]
        body = text
        trailing = "."
        if body.endswith("."):
            body = body[:-1]
        else:
            trailing = ""
        return f"{body}, {phrase}{trailing}"


# ---------------------------------------------------------------------------
# remote clients


class BackendError(RuntimeError):
    """Base for remote backend failures; retriable unless stated otherwise."""


class BackendTimeout(BackendError):
    pass


class BackendProtocolError(BackendError):
    """Response was not valid JSON or violated the v1 schema."""


class BackendVersionMismatch(BackendError):
    """Handshake returned an unsupported protocol version."""


class BackendRemoteError(BackendError):
    """The backend answered with an error response."""


def _dumps(payload: dict) -> str:
    return json.dumps(payload, sort_keys=True, separators=(",", ":"))


class StdioTransport:
    """One JSON object per line over a child process's stdio. Serial."""

    concurrent = False

    def __init__(self, command: str | list[str], timeout: float = 30.0):
        if isinstance(command, str):
            command = shlex.split(command)
        self.command = command
        self.timeout = timeout
        self._lock = threading.Lock()
        self._proc: subprocess.Popen | None = None
        self._buf = bytearray()

    def _ensure_process(self) -> subprocess.Popen:
        if self._proc is None or self._proc.poll() is not None:
            # bufsize=0 keeps stdout unbuffered so select() sees every byte
            self._proc = subprocess.Popen(
                self.command,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                stderr=subprocess.DEVNULL,
                bufsize=0,
            )
            self._buf = bytearray()
        return self._proc

    def request(self, payload: dict) -> dict:
        with self._lock:
            proc = self._ensure_process()
            try:
                proc.stdin.write((_dumps(payload) + "\n").encode("utf-8"))
                proc.stdin.flush()
            except (BrokenPipeError, OSError) as exc:
                raise BackendError(f"backend process write failed: {exc}") from exc
            line = self._readline(proc)
        try:
            response = json.loads(line)
        except json.JSONDecodeError as exc:
            raise BackendProtocolError(f"malformed JSON from backend: {line[:200]!r}") from exc
        if not isinstance(response, dict):
            raise BackendProtocolError(f"non-object response: {response!r}")
        return response

    def _readline(self, proc: subprocess.Popen) -> bytes:
        import time

        fd = proc.stdout.fileno()
        deadline = time.monotonic() + self.timeout
        while b"\n" not in self._buf:
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                raise BackendTimeout(f"no response within {self.timeout}s")
            ready, _, _ = select.select([fd], [], [], min(remaining, 0.25))
            if not ready:
                if proc.poll() is not None:
                    raise BackendError(f"backend process exited ({proc.returncode})")
                continue
            chunk = proc.stdout.read(4096)
            if not chunk:
                raise BackendError("backend closed stdout")
            self._buf += chunk
        line, _, rest = bytes(self._buf).partition(b"\n")
        self._buf = bytearray(rest)
        return line

    def close(self):
        if self._proc is not None and self._proc.poll() is None:
            self._proc.terminate()
            try:
                self._proc.wait(timeout=3)
            except subprocess.TimeoutExpired:
                self._proc.kill()
        self._proc = None


class HttpTransport:
    """POST /generate, /mutate, /score, /hello on a base URL."""

    concurrent = True

    def __init__(self, base_url: str, timeout: float = 30.0):
        self.base_url = base_url.rstrip("/")
        self.timeout = timeout

    def request(self, payload: dict) -> dict:
        url = f"{self.base_url}/{payload['op']}"
        try:
            resp = _requests.post(url, json=payload, timeout=self.timeout)
        except _requests.Timeout as exc:
            raise BackendTimeout(f"no response from {url} within {self.timeout}s") from exc
        except _requests.RequestException as exc:
            raise BackendError(f"transport failure for {url}: {exc}") from exc
        try:
            response = resp.json()
        except ValueError as exc:
            raise BackendProtocolError(f"malformed JSON from {url}") from exc
        if not isinstance(response, dict):
            raise BackendProtocolError(f"non-object response from {url}")
        return response

    def close(self):
        pass


def make_transport(endpoint: str, timeout: float = 30.0):
    """"http(s)://..." -> HTTP; anything else is a subprocess command line."""
    if endpoint.startswith(("http://", "https://")):
        return HttpTransport(endpoint, timeout)
    return StdioTransport(endpoint, timeout)


class RemoteBackend:
    """Shared handshake + call plumbing for the three remote backend kinds."""

    def __init__(self, transport, retries: int = 0):
        self.transport = transport
        self.retries = retries
        self._hello: dict | None = None

    @property
    def concurrent(self) -> bool:
        self._handshake()
        return bool(self._hello.get("concurrent", False)) and self.transport.concurrent

    def _handshake(self):
        if self._hello is None:
            response = self.call({"op": "hello"})
            version = response.get("version")
            if version != PROTOCOL_VERSION:
                raise BackendVersionMismatch(
                    f"backend speaks protocol {version}, need {PROTOCOL_VERSION}")
            self._hello = response

    def call(self, payload: dict) -> dict:
        last: BackendError | None = None
        for attempt in range(self.retries + 1):
            try:
                response = self.transport.request(payload)
            except BackendError as exc:
                last = exc
                if attempt < self.retries:
                    logger.warning("backend call %s failed (attempt %d): %s",
                                   payload.get("op"), attempt + 1, exc)
                continue
            if "error" in response:
                raise BackendRemoteError(str(response.get("message") or response["error"]))
            return response
        raise last

    def close(self):
        self.transport.close()


class RemoteGenerator(RemoteBackend):
    def generate(self, req: GeneratorRequest) -> list[Token]:
        self._handshake()
        response = self.call({
            "op": "generate",
            "caption": req.caption,
            "prefix": [token_to_wire(t) for t in req.prefix],
            "n_tokens": req.n_tokens,
            "seed": req.seed,
        })
        tokens = response.get("tokens")
        if not isinstance(tokens, list):
            raise BackendProtocolError("generate response missing 'tokens' list")
        try:
            return [token_from_wire(t) for t in tokens]
        except ValueError as exc:
            raise BackendProtocolError(f"bad token in response: {exc}") from exc


class RemoteMutator(RemoteBackend):
    """Remote mutator that degrades to the built-in rules on failure."""

    def __init__(self, transport, retries: int = 0):
        super().__init__(transport, retries)
        self._fallback = RuleMutator()

    def mutate(self, req: MutationRequest) -> list[str]:
        try:
            self._handshake()
            response = self.call({
                "op": "mutate",
                "caption": req.caption,
                "count": req.count,
                "seed": req.seed,
            })
            captions = response.get("captions")
            if (not isinstance(captions, list) or len(captions) != req.count
                    or not all(isinstance(c, str) for c in captions)):
                raise BackendProtocolError("mutate response missing valid 'captions'")
            return captions
        except BackendError as exc:
            logger.warning("remote mutator failed (%s); using built-in rules", exc)
            return self._fallback.mutate(req)


class RemoteScorer(RemoteBackend):
    def score(self, smf_bytes: bytes, caption_text: str) -> float:
        self._handshake()
        response = self.call({
            "op": "score",
            "caption": caption_text,
            "smf_base64": base64.b64encode(smf_bytes).decode("ascii"),
        })
        score = response.get("score")
        if not isinstance(score, (int, float)):
            raise BackendProtocolError("score response missing numeric 'score'")
        return float(score)


# ---------------------------------------------------------------------------
# bundle


@dataclass
class Backends:
    """The three backends Algorithm-style search needs, bundled."""

    generator: object
    mutator: object
    scorer: object
    owned: list = field(default_factory=list)

    @classmethod
    def builtin(cls, epsilon: float = 0.15, stream_len: int | None = None) -> "Backends":
        from midialign.rewards import MockScorer

        return cls(generator=ToyGenerator(epsilon=epsilon, stream_len=stream_len),
                   mutator=RuleMutator(), scorer=MockScorer())

    @classmethod
    def from_endpoints(cls, generator: str = "builtin", mutator: str = "builtin",
                       scorer: str = "builtin", timeout: float = 30.0,
                       retries: int = 0) -> "Backends":
        """Build from endpoint strings: "builtin", an http(s) URL, or a
        subprocess command line."""
        owned = []

        def remote(endpoint, cls_):
            transport = make_transport(endpoint, timeout)
            backend = cls_(transport, retries=retries)
            owned.append(backend)
            return backend

        from midialign.rewards import MockScorer

        gen = ToyGenerator() if generator == "builtin" else remote(generator, RemoteGenerator)
        mut = RuleMutator() if mutator == "builtin" else remote(mutator, RemoteMutator)
        sco = MockScorer() if scorer == "builtin" else remote(scorer, RemoteScorer)
        return cls(generator=gen, mutator=mut, scorer=sco, owned=owned)

    def close(self):
        for backend in self.owned:
            backend.close()


def generate_continuation(req: GeneratorRequest, generator=None) -> list[Token]:
    """Extend a prefix by up to n_tokens through a generator backend."""
    return (generator or ToyGenerator()).generate(req)


def mutate_caption(req: MutationRequest, mutator=None) -> list[str]:
    """Produce ``count`` distinct attribute-preserving caption variations."""
    return (mutator or RuleMutator()).mutate(req)
