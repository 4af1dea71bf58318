"""MIDI data layer: token vocabulary, note decoding, file I/O, feature extraction."""

from midialign.midi.tokens import (
    BAR,
    EOS,
    DEFAULT_PPQ,
    NoteEvent,
    Token,
    duration_bin_ticks,
    first_tempo,
    nearest_duration_bin,
    note_on,
    duration,
    time_shift,
    tempo,
    token_from_wire,
    token_to_wire,
    tokens_to_notes,
)
from midialign.midi.smf import SmfParseError, notes_to_smf, parse_smf
from midialign.midi.features import (
    Key,
    estimate_key,
    extract_tempo,
    pitch_class_histogram,
    transpose,
)

__all__ = [
    "BAR",
    "EOS",
    "DEFAULT_PPQ",
    "Key",
    "NoteEvent",
    "SmfParseError",
    "Token",
    "duration",
    "duration_bin_ticks",
    "estimate_key",
    "extract_tempo",
    "first_tempo",
    "nearest_duration_bin",
    "note_on",
    "notes_to_smf",
    "parse_smf",
    "pitch_class_histogram",
    "tempo",
    "time_shift",
    "token_from_wire",
    "token_to_wire",
    "tokens_to_notes",
    "transpose",
]
