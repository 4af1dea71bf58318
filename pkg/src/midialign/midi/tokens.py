"""Event-token vocabulary and the token -> note decoder.

The vocabulary is REMI-flavoured and deliberately small: note-on, duration,
time-shift, tempo, bar, and end-of-sequence. Duration and time-shift values
are 32 geometric bins (one step = a quarter octave, ratio 2**0.25) anchored
so that exact musical durations land on bins: bin 0 is a 1/32 note, bin 8 an
eighth, bin 12 a quarter, bin 16 a half, bin 28 four whole notes.
"""

from __future__ import annotations

from dataclasses import dataclass

DEFAULT_PPQ = 480
DEFAULT_VELOCITY = 96

N_BINS = 32
QUARTER_BIN = 12  # bin whose decoded length is exactly one quarter note
EIGHTH_BIN = 8
HALF_BIN = 16

BEATS_PER_BAR = 4

KIND_NOTE_ON = "on"
KIND_DURATION = "dur"
KIND_TIME_SHIFT = "shift"
KIND_TEMPO = "tempo"
KIND_BAR = "bar"
KIND_EOS = "eos"

_VALUE_RANGES = {
    KIND_NOTE_ON: (0, 127),
    KIND_DURATION: (0, N_BINS - 1),
    KIND_TIME_SHIFT: (0, N_BINS - 1),
    KIND_TEMPO: (20, 300),
}


@dataclass(frozen=True)
class Token:
    """One atomic symbol of a generated sequence."""

    kind: str
    value: int | None = None

    def __post_init__(self):
        if self.kind in _VALUE_RANGES:
            lo, hi = _VALUE_RANGES[self.kind]
            if self.value is None or not lo <= self.value <= hi:
                raise ValueError(f"{self.kind} value {self.value} outside [{lo}, {hi}]")
        elif self.kind in (KIND_BAR, KIND_EOS):
            if self.value is not None:
                raise ValueError(f"{self.kind} token carries no value")
        else:
            raise ValueError(f"unknown token kind {self.kind!r}")


def note_on(pitch: int) -> Token:
    return Token(KIND_NOTE_ON, pitch)


def duration(bin_index: int) -> Token:
    return Token(KIND_DURATION, bin_index)


def time_shift(bin_index: int) -> Token:
    return Token(KIND_TIME_SHIFT, bin_index)


def tempo(bpm: int) -> Token:
    return Token(KIND_TEMPO, bpm)


BAR = Token(KIND_BAR)
EOS = Token(KIND_EOS)


@dataclass(frozen=True, order=True)
class NoteEvent:
    """A decoded note. Times are in ticks at the surrounding file's ppq."""

    onset: int
    pitch: int
    duration: int
    velocity: int = DEFAULT_VELOCITY

    def __post_init__(self):
        if self.onset < 0:
            raise ValueError(f"onset {self.onset} < 0")
        if self.duration < 1:
            raise ValueError(f"duration {self.duration} < 1")
        if not 0 <= self.pitch <= 127:
            raise ValueError(f"pitch {self.pitch} outside [0, 127]")
        if not 1 <= self.velocity <= 127:
            raise ValueError(f"velocity {self.velocity} outside [1, 127]")


def duration_bin_ticks(bin_index: int, ppq: int = DEFAULT_PPQ) -> int:
    """Tick length of a duration/time-shift bin at the given ppq."""
    if not 0 <= bin_index < N_BINS:
        raise ValueError(f"bin {bin_index} outside [0, {N_BINS - 1}]")
    return max(1, round(ppq * 2.0 ** ((bin_index - QUARTER_BIN) / 4.0)))


def nearest_duration_bin(ticks: int, ppq: int = DEFAULT_PPQ) -> int:
    """Bin whose decoded length is closest to ``ticks`` (log distance)."""
    import math

    if ticks < 1:
        return 0
    raw = QUARTER_BIN + 4.0 * math.log2(ticks / ppq)
    return min(N_BINS - 1, max(0, round(raw)))


def tokens_to_notes(tokens, ppq: int = DEFAULT_PPQ) -> list[NoteEvent]:
    """Decode a token sequence into notes.

    Total and best-effort: a running cursor advances on time-shift and bar
    tokens; each note-on pairs with the next duration token, or falls back
    to a quarter note if another note-on (or the end) arrives first; anything
    after EOS is ignored. Never raises on malformed sequences.
    """
    if ppq <= 0:
        raise ValueError(f"ppq must be positive, got {ppq}")
    notes: list[NoteEvent] = []
    cursor = 0
    pending: tuple[int, int] | None = None  # (onset, pitch)
    bar_ticks = BEATS_PER_BAR * ppq

    def flush(bin_index: int) -> None:
        nonlocal pending
        if pending is not None:
            onset, pitch = pending
            notes.append(NoteEvent(onset, pitch, duration_bin_ticks(bin_index, ppq)))
            pending = None

    for tok in tokens:
        if tok.kind == KIND_EOS:
            break
        if tok.kind == KIND_NOTE_ON:
            flush(QUARTER_BIN)
            pending = (cursor, tok.value)
        elif tok.kind == KIND_DURATION:
            flush(tok.value)
        elif tok.kind == KIND_TIME_SHIFT:
            cursor += duration_bin_ticks(tok.value, ppq)
        elif tok.kind == KIND_BAR:
            cursor = (cursor // bar_ticks + 1) * bar_ticks
        # tempo tokens do not affect note decoding
    flush(QUARTER_BIN)
    return notes


def first_tempo(tokens) -> int | None:
    """BPM of the first tempo token, or None if the sequence has none."""
    for tok in tokens:
        if tok.kind == KIND_EOS:
            return None
        if tok.kind == KIND_TEMPO:
            return tok.value
    return None


def token_to_wire(tok: Token) -> list:
    """JSON-friendly wire form, e.g. ["on", 60] or ["bar"]."""
    if tok.value is None:
        return [tok.kind]
    return [tok.kind, tok.value]


def token_from_wire(obj) -> Token:
    """Inverse of token_to_wire; raises ValueError on malformed input."""
    if not isinstance(obj, (list, tuple)) or not 1 <= len(obj) <= 2:
        raise ValueError(f"malformed wire token {obj!r}")
    kind = obj[0]
    value = obj[1] if len(obj) == 2 else None
    if value is not None and not isinstance(value, int):
        raise ValueError(f"wire token value must be an integer, got {value!r}")
    return Token(kind, value)
