"""Model slots: generator, mutator, scorer.

Each slot resolves from a spec string:

    "stub"                        deterministic built-in (no weights needed)
    "clap:<model-id>"             scorer only: audio-text embedding checkpoint
    "llm:<endpoint-url>"          mutator only: HTTP completion service
    "<module.path>:<factory>"     anything else: dotted-path factory, called
                                  with the BridgeConfig

Real adapters are optional by nature; they import their heavyweight
dependencies lazily and fail at startup (not per request) when the model
cannot load.
"""

from __future__ import annotations

import hashlib
import importlib
import random
import time

import numpy as np

from midialign_bridge.adapter import (
    DURATION_BASE,
    EOS_ID,
    NOTE_ON_BASE,
    SHIFT_BASE,
    TEMPO_BASE,
)
from midialign_bridge.synth import render_smf


class ModelLoadError(RuntimeError):
    pass


def _seed64(*parts) -> int:
    h = hashlib.blake2b(digest_size=8)
    for part in parts:
        h.update(str(part).encode("utf-8"))
        h.update(b"\x00")
    return int.from_bytes(h.digest(), "big")


# --- generator


class StubGenerator:
    """Deterministic native-token generator standing in for a checkpoint.

    The stream is a pure function of (caption, seed, prefix length): a
    tempo token, then note-on / duration / time-shift groups over a fixed
    mid-range pitch set.
    """

    def generate(self, caption: str, prefix: list[int], n_tokens: int,
                 seed: int) -> list[int]:
        rng = random.Random(_seed64("gen", caption, seed))
        stream: list[int] = [TEMPO_BASE + 100]  # 120 bpm
        while len(stream) < len(prefix) + n_tokens:
            pitch = 48 + rng.randrange(36)
            stream.append(NOTE_ON_BASE + pitch)
            stream.append(DURATION_BASE + rng.choice((8, 12, 16)))
            stream.append(SHIFT_BASE + 8)
        return stream[len(prefix):len(prefix) + n_tokens]


# --- mutator


class StubMutator:
    """Deterministic caption paraphraser (suffix descriptor phrases only,
    so parseable attributes survive untouched)."""

    PHRASES = (
        "with a gentle sway", "carrying a subtle pulse",
        "with understated dynamics", "evoking wide open space",
        "with a hint of nostalgia", "carried by a steady groove",
    )

    def mutate(self, caption: str, count: int, seed: int) -> list[str]:
        out = []
        seen = {caption}
        for i in range(count):
            rng = random.Random(_seed64("mut", caption, seed, i))
            body = caption[:-1] if caption.endswith(".") else caption
            tail = "." if caption.endswith(".") else ""
            candidate = f"{body}, {self.PHRASES[rng.randrange(len(self.PHRASES))]}{tail}"
            while candidate in seen:
                candidate = (candidate[:-1] if tail else candidate) \
                    + f", {self.PHRASES[rng.randrange(len(self.PHRASES))]}" + tail
            seen.add(candidate)
            out.append(candidate)
        return out


class HttpLlmMutator:
    """Caption mutator backed by an HTTP completion endpoint.

    Expects the service to answer POST {"model", "prompt", "count"} with
    {"captions": [...]} (count entries). The API key is read from the
    environment variable named in the config and sent as a bearer token;
    it never appears in logs or reports. The instruction prompt below is
    this bridge's own wording, not a canonical one. Retries with
    exponential backoff; on exhaustion the stub mutator answers instead so
    the serving process stays useful.
    """

    PROMPT = ("Rewrite the following music description {count} ways. Keep "
              "every stated musical fact (key, tempo, instruments) intact; "
              "vary only the phrasing and imagery. Description: {caption}")

    def __init__(self, endpoint: str, model: str = "", api_key: str = "",
                 retries: int = 3, timeout: float = 30.0):
        self.endpoint = endpoint
        self.model = model
        self._api_key = api_key
        self.retries = retries
        self.timeout = timeout
        self._fallback = StubMutator()

    def mutate(self, caption: str, count: int, seed: int) -> list[str]:
        import requests

        headers = {}
        if self._api_key:
            headers["Authorization"] = f"Bearer {self._api_key}"
        payload = {
            "model": self.model,
            "prompt": self.PROMPT.format(count=count, caption=caption),
            "count": count,
            "seed": seed,
        }
        for attempt in range(self.retries + 1):
            try:
                resp = requests.post(self.endpoint, json=payload,
                                     headers=headers, timeout=self.timeout)
                resp.raise_for_status()
                captions = resp.json().get("captions")
                if isinstance(captions, list) and len(captions) == count and \
                        all(isinstance(c, str) for c in captions):
                    return captions
            except requests.RequestException:
                if attempt < self.retries:
                    time.sleep(min(8.0, 0.5 * 2 ** attempt))
        return self._fallback.mutate(caption, count, seed)


# --- scorer


class StubScorer:
    """Deterministic similarity: hash-seeded embeddings of the caption and
    the rendered audio, cosine-compared. Content-free but byte-stable:
    identical (caption, bytes) always scores identically."""

    DIM = 32

    def __init__(self, sample_rate: int = 22050):
        self.sample_rate = sample_rate

    @classmethod
    def _embed(cls, tag: str, data: bytes) -> np.ndarray:
        rng = random.Random(_seed64(tag, hashlib.sha256(data).hexdigest()))
        vec = np.array([rng.gauss(0.0, 1.0) for _ in range(cls.DIM)])
        return vec / np.linalg.norm(vec)

    def score(self, smf_bytes: bytes, caption: str) -> float:
        pcm, _ = render_smf(smf_bytes, self.sample_rate)
        audio = self._embed("audio", pcm.tobytes())
        text = self._embed("text", caption.encode("utf-8"))
        return float(np.clip(np.dot(audio, text), -1.0, 1.0))


class ClapScorer:
    """Audio-text embedding scorer over a real checkpoint.

    Renders the MIDI with the built-in synth, embeds audio and caption with
    the named checkpoint, and returns their cosine similarity clamped to
    [-1, 1]. Determinism is best-effort on GPU kernels.
    """

    SAMPLE_RATE = 48000

    def __init__(self, model_id: str, device: str = "cpu"):
        try:
            import torch
            from transformers import AutoProcessor, ClapModel
        except ImportError as exc:
            raise ModelLoadError(f"scorer dependencies missing: {exc}") from exc
        try:
            self._torch = torch
            self.model = ClapModel.from_pretrained(model_id).to(device).eval()
            self.processor = AutoProcessor.from_pretrained(model_id)
        except Exception as exc:  # noqa: BLE001 - any load failure is fatal at startup
            raise ModelLoadError(f"cannot load scorer model {model_id!r}: {exc}") from exc
        self.device = device

    def score(self, smf_bytes: bytes, caption: str) -> float:
        torch = self._torch
        pcm, rate = render_smf(smf_bytes, self.SAMPLE_RATE)
        with torch.no_grad():
            audio_inputs = self.processor(audios=pcm, sampling_rate=rate,
                                          return_tensors="pt").to(self.device)
            text_inputs = self.processor(text=[caption], return_tensors="pt",
                                         padding=True).to(self.device)
            audio_emb = self.model.get_audio_features(**audio_inputs)
            text_emb = self.model.get_text_features(**text_inputs)
            audio_emb = audio_emb / audio_emb.norm(dim=-1, keepdim=True)
            text_emb = text_emb / text_emb.norm(dim=-1, keepdim=True)
            value = float((audio_emb * text_emb).sum())
        return max(-1.0, min(1.0, value))


# --- resolution


def _dotted(spec: str, config):
    module_name, _, attr = spec.partition(":")
    try:
        module = importlib.import_module(module_name)
        factory = getattr(module, attr)
    except (ImportError, AttributeError) as exc:
        raise ModelLoadError(f"cannot resolve model factory {spec!r}: {exc}") from exc
    return factory(config)


def load_generator(config):
    if config.generator == "stub":
        return StubGenerator()
    return _dotted(config.generator, config)


def load_mutator(config):
    if config.mutator == "stub":
        return StubMutator()
    if config.mutator.startswith("llm:"):
        return HttpLlmMutator(
            endpoint=config.mutator[4:],
            model=config.llm_model,
            api_key=config.resolved_api_key,
        )
    return _dotted(config.mutator, config)


def load_scorer(config):
    if config.scorer == "stub":
        return StubScorer(sample_rate=config.sample_rate)
    if config.scorer.startswith("clap:"):
        return ClapScorer(config.scorer[5:], device=config.device)
    return _dotted(config.scorer, config)
