"""Musical feature extraction: pitch-class histogram, key, tempo.

Key estimation is Krumhansl-Schmuckler profile correlation: the
duration-weighted pitch-class histogram is Pearson-correlated against the 24
rotations of the Krumhansl-Kessler major/minor profiles and the best match
wins. Ties break to the lower tonic, major before minor.
"""

from __future__ import annotations

import statistics
from dataclasses import dataclass

import numpy as np

from midialign.midi.smf import parse_smf
from midialign.midi.tokens import NoteEvent

MAJOR = "major"
MINOR = "minor"

PITCH_CLASS_NAMES = ("C", "C#", "D", "D#", "E", "F", "F#", "G", "G#", "A", "A#", "B")

# Krumhansl-Kessler probe-tone profiles ("Cognitive Foundations of Musical
# Pitch", p. 30), index 0 = tonic.
KK_MAJOR = np.array(
    [6.35, 2.23, 3.48, 2.33, 4.38, 4.09, 2.52, 5.19, 2.39, 3.66, 2.29, 2.88]
)
KK_MINOR = np.array(
    [6.33, 2.68, 3.52, 5.38, 2.60, 3.53, 2.54, 4.75, 3.98, 2.69, 3.34, 3.17]
)

_MAJOR_INTERVALS = (0, 2, 4, 5, 7, 9, 11)
_MINOR_INTERVALS = (0, 2, 3, 5, 7, 8, 10)  # natural minor

# Without a tempo event, inter-onset inference assumes the conventional
# default of 500000 us per quarter (120 bpm) for the declared division.
_DEFAULT_BPM = 120.0


@dataclass(frozen=True, order=True)
class Key:
    """Tonic pitch class (0 = C) plus major/minor mode."""

    tonic: int
    mode: str

    def __post_init__(self):
        if not 0 <= self.tonic <= 11:
            raise ValueError(f"tonic {self.tonic} outside [0, 11]")
        if self.mode not in (MAJOR, MINOR):
            raise ValueError(f"mode must be {MAJOR!r} or {MINOR!r}, got {self.mode!r}")

    def pitch_classes(self) -> frozenset[int]:
        """Diatonic pitch-class set (natural minor for minor keys)."""
        intervals = _MAJOR_INTERVALS if self.mode == MAJOR else _MINOR_INTERVALS
        return frozenset((self.tonic + i) % 12 for i in intervals)

    def relative(self) -> "Key":
        """Relative major/minor partner (A minor <-> C major)."""
        if self.mode == MAJOR:
            return Key((self.tonic + 9) % 12, MINOR)
        return Key((self.tonic + 3) % 12, MAJOR)

    def __str__(self) -> str:
        return f"{PITCH_CLASS_NAMES[self.tonic]} {self.mode}"


def key_from_name(name: str) -> Key:
    """Parse strings like "F# minor" or "Eb major"."""
    parts = name.strip().split()
    if len(parts) != 2:
        raise ValueError(f"cannot parse key name {name!r}")
    letter, mode = parts[0], parts[1].lower()
    base = {"C": 0, "D": 2, "E": 4, "F": 5, "G": 7, "A": 9, "B": 11}.get(letter[0].upper())
    if base is None:
        raise ValueError(f"cannot parse key name {name!r}")
    for accidental in letter[1:]:
        if accidental in "#♯":
            base += 1
        elif accidental in "b♭":
            base -= 1
        else:
            raise ValueError(f"cannot parse key name {name!r}")
    return Key(base % 12, mode)


def pitch_class_histogram(notes) -> np.ndarray:
    """Duration-weighted pitch-class mass, shape (12,). Empty input -> zeros."""
    weights = np.zeros(12)
    for note in notes:
        weights[note.pitch % 12] += note.duration
    return weights


def _correlation(a: np.ndarray, b: np.ndarray) -> float:
    """Pearson correlation; 0.0 when either vector is constant."""
    da = a - a.mean()
    db = b - b.mean()
    denom = np.sqrt((da * da).sum() * (db * db).sum())
    if denom == 0.0:
        return 0.0
    return float((da * db).sum() / denom)


def key_correlations(histogram: np.ndarray) -> dict[Key, float]:
    """Correlation of a pitch-class histogram against all 24 key profiles."""
    out: dict[Key, float] = {}
    for tonic in range(12):
        out[Key(tonic, MAJOR)] = _correlation(histogram, np.roll(KK_MAJOR, tonic))
        out[Key(tonic, MINOR)] = _correlation(histogram, np.roll(KK_MINOR, tonic))
    return out


def estimate_key(notes) -> Key:
    """Best-correlated key for a non-empty note list."""
    notes = list(notes)
    if not notes:
        raise ValueError("no notes")
    corrs = key_correlations(pitch_class_histogram(notes))
    # ties: lower tonic first, then major before minor
    return max(
        corrs,
        key=lambda k: (corrs[k], -k.tonic, 0 if k.mode == MAJOR else -1),
    )


def transpose(notes, semitones: int) -> list[NoteEvent]:
    """Shift every pitch by ``semitones``; raises if any pitch leaves 0-127."""
    return [
        NoteEvent(n.onset, n.pitch + semitones, n.duration, n.velocity) for n in notes
    ]


def extract_tempo(source, ppq: int = 480) -> float:
    """Tempo in bpm from an SMF byte string or a note list.

    A tempo meta event wins outright. Otherwise the median positive
    inter-onset interval is read as one beat at the conventional 120 bpm
    baseline for the file's division: bpm = 120 * ppq / median_ioi.
    Raises ValueError when neither route is decidable.
    """
    if isinstance(source, (bytes, bytearray)):
        notes, ppq, bpm = parse_smf(bytes(source))
        if bpm is not None:
            return float(bpm)
    else:
        notes = list(source)

    onsets = sorted(n.onset for n in notes)
    if len(onsets) < 2:
        raise ValueError("tempo undecidable: no tempo event and fewer than 2 onsets")
    intervals = [b - a for a, b in zip(onsets, onsets[1:]) if b > a]
    if not intervals:
        raise ValueError("tempo undecidable: all onsets coincide")
    return _DEFAULT_BPM * ppq / statistics.median(intervals)
