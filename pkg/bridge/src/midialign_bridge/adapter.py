"""Token adapters: wire tokens <-> native model ids <-> SMF bytes.

The stub generator's native vocabulary is a flat id space:

    0..127    note-on (MIDI pitch)
    128..159  duration bin (32 geometric bins, bin 12 = quarter note)
    160..191  time-shift bin (same table)
    192..472  tempo (id - 192 + 20 bpm)
    473       bar
    474       eos

Known lossy cases of the SMF direction (see the package README): durations
and onset deltas quantize onto the bin grid, with sub-1/32-note remainders
dropped; velocities collapse to the default; overlapping same-pitch notes
survive only until the writer truncates them. Notes whose durations and
deltas are exact bin values round-trip losslessly. Unmappable ids raise
AdapterError naming the offending token.
"""

from __future__ import annotations

import math

from midialign_bridge.smf import Note, read_smf, write_smf

NOTE_ON_BASE = 0
DURATION_BASE = 128
SHIFT_BASE = 160
TEMPO_BASE = 192
BAR_ID = 473
EOS_ID = 474
VOCAB_SIZE = 475

N_BINS = 32
QUARTER_BIN = 12
DEFAULT_VELOCITY = 96


class AdapterError(ValueError):
    pass


def bin_ticks(bin_index: int, ppq: int) -> int:
    return max(1, round(ppq * 2.0 ** ((bin_index - QUARTER_BIN) / 4.0)))


def nearest_bin(ticks: int, ppq: int) -> int:
    if ticks < 1:
        return 0
    raw = QUARTER_BIN + 4.0 * math.log2(ticks / ppq)
    return min(N_BINS - 1, max(0, round(raw)))


def wire_to_native(token) -> int:
    kind = token[0] if isinstance(token, (list, tuple)) and token else None
    value = token[1] if isinstance(token, (list, tuple)) and len(token) == 2 else None
    if kind == "on" and isinstance(value, int) and 0 <= value <= 127:
        return NOTE_ON_BASE + value
    if kind == "dur" and isinstance(value, int) and 0 <= value < N_BINS:
        return DURATION_BASE + value
    if kind == "shift" and isinstance(value, int) and 0 <= value < N_BINS:
        return SHIFT_BASE + value
    if kind == "tempo" and isinstance(value, int) and 20 <= value <= 300:
        return TEMPO_BASE + value - 20
    if kind == "bar" and value is None:
        return BAR_ID
    if kind == "eos" and value is None:
        return EOS_ID
    raise AdapterError(f"unmappable wire token {token!r}")


def native_to_wire(native_id: int):
    if NOTE_ON_BASE <= native_id < NOTE_ON_BASE + 128:
        return ["on", native_id - NOTE_ON_BASE]
    if DURATION_BASE <= native_id < DURATION_BASE + N_BINS:
        return ["dur", native_id - DURATION_BASE]
    if SHIFT_BASE <= native_id < SHIFT_BASE + N_BINS:
        return ["shift", native_id - SHIFT_BASE]
    if TEMPO_BASE <= native_id < TEMPO_BASE + 281:
        return ["tempo", native_id - TEMPO_BASE + 20]
    if native_id == BAR_ID:
        return ["bar"]
    if native_id == EOS_ID:
        return ["eos"]
    raise AdapterError(f"unmappable native token {native_id!r}")


def _decompose_delta(delta: int, ppq: int) -> list[int]:
    """Greedy largest-bin decomposition of a tick delta into shift bins."""
    bins = []
    remaining = delta
    floor_ticks = bin_ticks(0, ppq)
    while remaining >= floor_ticks:
        for b in range(N_BINS - 1, -1, -1):
            ticks = bin_ticks(b, ppq)
            if ticks <= remaining:
                bins.append(b)
                remaining -= ticks
                break
    if remaining * 2 >= floor_ticks:
        bins.append(0)
    return bins


def smf_to_native(data: bytes) -> list[int]:
    """Tokenize SMF bytes into native ids (tempo first, then note groups)."""
    notes, ppq, bpm = read_smf(data)
    out = [TEMPO_BASE + min(300, max(20, bpm or 120)) - 20]
    cursor = 0
    for note in notes:
        for b in _decompose_delta(note.onset - cursor, ppq):
            out.append(SHIFT_BASE + b)
            cursor += bin_ticks(b, ppq)
        out.append(NOTE_ON_BASE + note.pitch)
        out.append(DURATION_BASE + nearest_bin(note.duration, ppq))
    out.append(EOS_ID)
    return out


def native_to_smf(native_ids, ppq: int = 480) -> bytes:
    """Decode native ids back into an SMF byte string."""
    notes: list[Note] = []
    cursor = 0
    bpm = 120
    pending: tuple[int, int] | None = None

    def flush(bin_index: int):
        nonlocal pending
        if pending is not None:
            onset, pitch = pending
            notes.append(Note(onset, pitch, bin_ticks(bin_index, ppq), DEFAULT_VELOCITY))
            pending = None

    for native_id in native_ids:
        wire = native_to_wire(native_id)  # raises AdapterError on bad ids
        kind = wire[0]
        if kind == "eos":
            break
        if kind == "tempo":
            bpm = wire[1]
        elif kind == "on":
            flush(QUARTER_BIN)
            pending = (cursor, wire[1])
        elif kind == "dur":
            flush(wire[1])
        elif kind == "shift":
            cursor += bin_ticks(wire[1], ppq)
        elif kind == "bar":
            bar = 4 * ppq
            cursor = (cursor // bar + 1) * bar
    flush(QUARTER_BIN)
    return write_smf(notes, ppq, bpm)
