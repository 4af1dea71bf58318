"""Objective scores for a generated sequence.

Two objectives feed one composite: a text-audio consistency score delegated
to a pluggable scorer backend (with a deterministic built-in mock), and a
harmonic consistency score computed natively as the in-key fraction of
generated notes. The composite is their weighted sum, alpha * ra + beta * rh,
with defaults alpha=1 and beta=5.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass

from midialign.midi.features import (
    MAJOR,
    MINOR,
    Key,
    estimate_key,
)
from midialign.midi.smf import notes_to_smf, parse_smf
from midialign.midi.tokens import DEFAULT_PPQ, first_tempo, tokens_to_notes

logger = logging.getLogger(__name__)

DEFAULT_ALPHA = 1.0
DEFAULT_BETA = 5.0

# tempo words a caption may use instead of an explicit bpm figure
TEMPO_WORDS = {
    "presto": 180,
    "allegro": 140,
    "moderato": 110,
    "andante": 90,
    "adagio": 70,
    "largo": 50,
}

# density words -> notes-per-beat targets
DENSITY_WORDS = {"sparse": 1.0, "dense": 4.0}

_KEY_RE = re.compile(r"\b([A-G])([#♯b♭])?[\s-]+(major|minor)\b", re.IGNORECASE)
_BPM_RE = re.compile(r"\b(\d{2,3})\s*(?:bpm|beats\s+per\s+minute)\b", re.IGNORECASE)
_DENSITY_RE = re.compile(r"\b(\d+(?:\.\d+)?)\s*notes?\s+per\s+beat\b", re.IGNORECASE)

_NATURALS = {"C": 0, "D": 2, "E": 4, "F": 5, "G": 7, "A": 9, "B": 11}


@dataclass(frozen=True)
class CaptionAttributes:
    """Structured view of a caption; unset fields stay None."""

    key: Key | None = None
    tempo_bpm: int | None = None
    density: float | None = None
    raw_text: str = ""


def parse_caption(text: str) -> CaptionAttributes:
    """Extract key, tempo, and density hints from free text.

    Unparseable captions yield all-unset attributes; this never raises.
    Note letters must be capitalized ("G minor" parses, "a minor point"
    does not). Explicit bpm figures win over tempo words.
    """
    key = None
    m = _KEY_RE.search(text)
    if m and m.group(1).isupper():
        tonic = _NATURALS[m.group(1)]
        if m.group(2) in ("#", "♯"):
            tonic += 1
        elif m.group(2) in ("b", "♭"):
            tonic -= 1
        key = Key(tonic % 12, m.group(3).lower())

    tempo_bpm = None
    m = _BPM_RE.search(text)
    if m and 20 <= int(m.group(1)) <= 300:
        tempo_bpm = int(m.group(1))
    else:
        lowered = text.lower()
        for word, bpm in TEMPO_WORDS.items():
            if re.search(rf"\b{word}\b", lowered):
                tempo_bpm = bpm
                break

    density = None
    m = _DENSITY_RE.search(text)
    if m and float(m.group(1)) > 0:
        density = float(m.group(1))
    else:
        lowered = text.lower()
        for word, value in DENSITY_WORDS.items():
            if re.search(rf"\b{word}\b", lowered):
                density = value
                break

    return CaptionAttributes(key=key, tempo_bpm=tempo_bpm, density=density, raw_text=text)


def harmonic_consistency(notes, key: Key) -> float:
    """1 - offkey/total: the in-key fraction of notes.

    Empty input scores 0.0 so that silence is never reward-optimal.
    """
    notes = list(notes)
    if not notes:
        return 0.0
    diatonic = key.pitch_classes()
    off = sum(1 for n in notes if n.pitch % 12 not in diatonic)
    return 1.0 - off / len(notes)


def resolve_reward_key(attrs: CaptionAttributes, notes) -> Key:
    """Key governing the harmonic score: the caption's when it names one,
    the estimated key of the realized notes otherwise."""
    if attrs.key is not None:
        return attrs.key
    notes = list(notes)
    if not notes:
        raise ValueError("no key in caption and no notes to estimate one from")
    return estimate_key(notes)


@dataclass(frozen=True)
class RewardBreakdown:
    """Both objective scores plus their weighted composite."""

    ra: float
    rh: float
    composite: float
    alpha: float = DEFAULT_ALPHA
    beta: float = DEFAULT_BETA

    @classmethod
    def compute(cls, ra: float, rh: float,
                alpha: float = DEFAULT_ALPHA, beta: float = DEFAULT_BETA) -> "RewardBreakdown":
        return cls(ra=ra, rh=rh, composite=composite_reward(ra, rh, alpha, beta),
                   alpha=alpha, beta=beta)


def composite_reward(ra: float, rh: float,
                     alpha: float = DEFAULT_ALPHA, beta: float = DEFAULT_BETA) -> float:
    return alpha * ra + beta * rh


class ScorerUnavailable(RuntimeError):
    """Scorer transport failed after all retries; carries the state id."""

    def __init__(self, state_id, cause):
        super().__init__(f"scorer unavailable for state {state_id}: {cause}")
        self.state_id = state_id
        self.cause = cause


def text_audio_consistency(state_tokens, caption_text: str, scorer,
                           retries: int = 0, state_id=None,
                           ppq: int = DEFAULT_PPQ) -> float:
    """Score a token sequence against a caption through a scorer backend.

    The tokens are decoded, rendered to SMF bytes, and sent with the caption
    text. The caption must be the ORIGINAL instruction, never a mutation.
    Transport failures are retried ``retries`` times, then surface as
    ScorerUnavailable carrying ``state_id``. Scores clamp to [-1, 1].
    """
    state_tokens = list(state_tokens)
    notes = tokens_to_notes(state_tokens, ppq)
    bpm = first_tempo(state_tokens) or 120
    smf = notes_to_smf(notes, ppq, bpm)
    last_error = None
    for attempt in range(retries + 1):
        try:
            score = scorer.score(smf, caption_text)
            return max(-1.0, min(1.0, float(score)))
        except ScorerUnavailable:
            raise
        except Exception as exc:  # noqa: BLE001 - transport errors vary by backend
            last_error = exc
            if attempt < retries:
                logger.warning("scorer attempt %d failed for state %s: %s",
                               attempt + 1, state_id, exc)
    raise ScorerUnavailable(state_id, last_error)


class MockScorer:
    """Deterministic offline stand-in for an audio-text similarity model.

    Scores how well the rendered notes realize the caption's parseable
    attributes. Weights {key: 0.5, tempo: 0.3, density: 0.2} renormalize
    over the attributes the caption actually names; an attribute-free
    caption scores a neutral 0.5.
    """

    concurrent = True

    _WEIGHTS = {"key": 0.5, "tempo": 0.3, "density": 0.2}

    def score(self, smf_bytes: bytes, caption_text: str) -> float:
        attrs = parse_caption(caption_text)
        notes, ppq, bpm = parse_smf(smf_bytes)

        terms: dict[str, float] = {}
        if attrs.key is not None:
            terms["key"] = self._key_term(attrs.key, notes)
        if attrs.tempo_bpm is not None:
            terms["tempo"] = self._tempo_term(attrs.tempo_bpm, bpm)
        if attrs.density is not None:
            terms["density"] = self._density_term(attrs.density, notes, ppq)
        if not terms:
            return 0.5
        total_weight = sum(self._WEIGHTS[name] for name in terms)
        return sum(self._WEIGHTS[name] * value for name, value in terms.items()) / total_weight

    @staticmethod
    def _key_term(caption_key: Key, notes) -> float:
        if not notes:
            return 0.0
        estimated = estimate_key(notes)
        if estimated == caption_key:
            return 1.0
        if estimated == caption_key.relative():
            return 0.5
        return 0.0

    @staticmethod
    def _tempo_term(caption_bpm: int, file_bpm: int | None) -> float:
        if file_bpm is None:
            return 0.0
        return max(0.0, 1.0 - abs(file_bpm - caption_bpm) / 60.0)

    @staticmethod
    def _density_term(caption_density: float, notes, ppq: int) -> float:
        if not notes:
            return 0.0
        span = max(n.onset + n.duration for n in notes) - min(n.onset for n in notes)
        if span <= 0:
            return 0.0
        estimated = len(notes) / (span / ppq)
        return max(0.0, 1.0 - abs(estimated - caption_density) / caption_density)


def mock_scorer(smf_bytes: bytes, caption_text: str) -> float:
    """Functional form of MockScorer for one-off scoring."""
    return MockScorer().score(smf_bytes, caption_text)
