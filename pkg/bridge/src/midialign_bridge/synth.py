"""SMF-to-audio rendering for the scorer path.

A deliberately simple additive synth: each note is a decaying stack of
three harmonics. Non-canonical by design; the sample rate and decay are
configurable so a deployment can document its own settings. Output is mono
float32 in [-1, 1].
"""

from __future__ import annotations

import numpy as np

from midialign_bridge.smf import Note, read_smf

DEFAULT_SAMPLE_RATE = 22050
_HARMONIC_WEIGHTS = (1.0, 0.45, 0.2)
_DECAY_PER_SECOND = 4.0


def render_notes(notes: list[Note], ppq: int, bpm: float,
                 sample_rate: int = DEFAULT_SAMPLE_RATE) -> np.ndarray:
    if not notes:
        return np.zeros(int(0.25 * sample_rate), dtype=np.float32)
    seconds_per_tick = 60.0 / (bpm * ppq)
    total_ticks = max(n.onset + n.duration for n in notes)
    total = int((total_ticks * seconds_per_tick + 0.3) * sample_rate)
    out = np.zeros(total, dtype=np.float64)
    for n in notes:
        start = int(n.onset * seconds_per_tick * sample_rate)
        length = max(1, int(n.duration * seconds_per_tick * sample_rate))
        t = np.arange(length) / sample_rate
        freq = 440.0 * 2.0 ** ((n.pitch - 69) / 12.0)
        envelope = (n.velocity / 127.0) * np.exp(-_DECAY_PER_SECOND * t)
        wave = np.zeros(length)
        for h, weight in enumerate(_HARMONIC_WEIGHTS, start=1):
            wave += weight * np.sin(2.0 * np.pi * freq * h * t)
        out[start:start + length] += envelope * wave
    peak = np.abs(out).max()
    if peak > 0:
        out /= max(1.0, peak)
    return out.astype(np.float32)


def render_smf(data: bytes, sample_rate: int = DEFAULT_SAMPLE_RATE) -> tuple[np.ndarray, int]:
    """Render SMF bytes; returns (pcm, sample_rate)."""
    notes, ppq, bpm = read_smf(data)
    return render_notes(notes, ppq, bpm or 120, sample_rate), sample_rate
