"""Minimal standalone SMF reader/writer for the bridge.

The bridge deliberately does not import the engine, so it carries its own
small MIDI layer: enough to read note events and the first tempo out of
format 0/1 files (for synthesis and tokenization) and to write the simple
single-track files the adapters produce.
"""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True, order=True)
class Note:
    onset: int
    pitch: int
    duration: int
    velocity: int = 96


class SmfError(ValueError):
    pass


def _vlq_encode(value: int) -> bytes:
    chunks = [value & 0x7F]
    value >>= 7
    while value:
        chunks.append(0x80 | (value & 0x7F))
        value >>= 7
    return bytes(reversed(chunks))


def _vlq_decode(data: bytes, pos: int) -> tuple[int, int]:
    value = 0
    for _ in range(4):
        if pos >= len(data):
            raise SmfError("truncated variable-length quantity")
        byte = data[pos]
        pos += 1
        value = (value << 7) | (byte & 0x7F)
        if not byte & 0x80:
            return value, pos
    raise SmfError("variable-length quantity too long")


def write_smf(notes, ppq: int = 480, bpm: int = 120) -> bytes:
    events = [(0, 0, bytes((0xFF, 0x51, 0x03)) + round(60_000_000 / bpm).to_bytes(3, "big"))]
    for n in sorted(notes):
        events.append((n.onset, 2, bytes((0x90, n.pitch, n.velocity))))
        events.append((n.onset + n.duration, 1, bytes((0x80, n.pitch, 0))))
    events.sort(key=lambda e: (e[0], e[1]))
    track = bytearray()
    last = 0
    for tick, _, payload in events:
        track += _vlq_encode(tick - last) + payload
        last = tick
    track += _vlq_encode(0) + bytes((0xFF, 0x2F, 0x00))
    return (b"MThd" + (6).to_bytes(4, "big") + (0).to_bytes(2, "big")
            + (1).to_bytes(2, "big") + ppq.to_bytes(2, "big")
            + b"MTrk" + len(track).to_bytes(4, "big") + bytes(track))


_DATA_BYTES = {0x80: 2, 0x90: 2, 0xA0: 2, 0xB0: 2, 0xC0: 1, 0xD0: 1, 0xE0: 2}


def read_smf(data: bytes) -> tuple[list[Note], int, int | None]:
    """(notes, ppq, bpm or None). Tolerant: multi-track flattened, first
    tempo wins, dangling note-ons closed at end of track."""
    if len(data) < 14 or data[:4] != b"MThd":
        raise SmfError("not a MIDI file")
    header_len = int.from_bytes(data[4:8], "big")
    fmt = int.from_bytes(data[8:10], "big")
    if fmt not in (0, 1):
        raise SmfError(f"unsupported format {fmt}")
    division = int.from_bytes(data[12:14], "big")
    if division & 0x8000 or division == 0:
        raise SmfError("unsupported division")

    notes: list[Note] = []
    tempos: list[tuple[int, int]] = []
    pos = 8 + header_len
    while pos + 8 <= len(data):
        magic = data[pos:pos + 4]
        length = int.from_bytes(data[pos + 4:pos + 8], "big")
        if pos + 8 + length > len(data):
            raise SmfError("chunk overruns file")
        if magic == b"MTrk":
            _read_track(data, pos + 8, length, notes, tempos)
        pos += 8 + length
    bpm = None
    if tempos:
        tempos.sort()
        bpm = round(60_000_000 / tempos[0][1])
    return sorted(notes), division, bpm


def _read_track(data, start, length, notes, tempos):
    pos = start
    end = start + length
    tick = 0
    status = None
    open_notes: dict[int, list[tuple[int, int]]] = {}
    while pos < end:
        delta, pos = _vlq_decode(data, pos)
        tick += delta
        if pos >= end:
            raise SmfError("event truncated")
        byte = data[pos]
        if byte == 0xFF:
            meta_type = data[pos + 1]
            meta_len, body = _vlq_decode(data, pos + 2)
            if meta_type == 0x51 and meta_len == 3:
                mpqn = int.from_bytes(data[body:body + 3], "big")
                if mpqn:
                    tempos.append((tick, mpqn))
            pos = body + meta_len
            status = None
            if meta_type == 0x2F:
                break
        elif byte in (0xF0, 0xF7):
            sysex_len, body = _vlq_decode(data, pos + 1)
            pos = body + sysex_len
            status = None
        else:
            if byte & 0x80:
                status = byte
                pos += 1
            elif status is None:
                raise SmfError("dangling data byte")
            n_data = _DATA_BYTES.get(status & 0xF0)
            if n_data is None:
                raise SmfError(f"unsupported status {status:#x}")
            d1 = data[pos]
            d2 = data[pos + 1] if n_data == 2 else 0
            pos += n_data
            kind = status & 0xF0
            if kind == 0x90 and d2 > 0:
                open_notes.setdefault(d1, []).append((tick, d2))
            elif kind == 0x80 or (kind == 0x90 and d2 == 0):
                stack = open_notes.get(d1)
                if stack:
                    onset, velocity = stack.pop(0)
                    notes.append(Note(onset, d1, max(1, tick - onset), velocity))
    for pitch, stack in open_notes.items():
        for onset, velocity in stack:
            notes.append(Note(onset, pitch, max(1, tick - onset), velocity))
