"""Standard MIDI File emit/parse.

The writer produces format-0 files: one track, a tempo meta event at tick 0,
note-on/note-off pairs on channel 0, and an end-of-track meta. Output bytes
are a pure function of the input, so fixtures can pin exact digests.

The reader is deliberately more tolerant than the writer: it accepts format
0 and 1, flattens all tracks onto one timeline, takes the first tempo event,
skips unknown chunks and messages, and closes dangling note-ons at the end
of their track. Structural damage (bad magic, truncated chunk, SMPTE
division) raises SmfParseError with the byte offset of the problem.
"""

from __future__ import annotations

import logging

from midialign.midi.tokens import NoteEvent

logger = logging.getLogger(__name__)

_HEADER_MAGIC = b"MThd"
_TRACK_MAGIC = b"MTrk"

# status-nibble -> number of data bytes for channel messages
_CHANNEL_DATA_BYTES = {
    0x80: 2, 0x90: 2, 0xA0: 2, 0xB0: 2, 0xC0: 1, 0xD0: 1, 0xE0: 2,
}


class SmfParseError(ValueError):
    """Malformed MIDI file; ``offset`` is the byte position of the defect."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte {offset})")
        self.offset = offset


def _encode_vlq(value: int) -> bytes:
    """Variable-length quantity, 7 bits per byte, high bit = continuation."""
    if value < 0:
        raise ValueError(f"negative delta time {value}")
    chunks = [value & 0x7F]
    value >>= 7
    while value:
        chunks.append(0x80 | (value & 0x7F))
        value >>= 7
    return bytes(reversed(chunks))


def _decode_vlq(data: bytes, pos: int) -> tuple[int, int]:
    value = 0
    for _ in range(4):
        if pos >= len(data):
            raise SmfParseError("truncated variable-length quantity", pos)
        byte = data[pos]
        pos += 1
        value = (value << 7) | (byte & 0x7F)
        if not byte & 0x80:
            return value, pos
    raise SmfParseError("variable-length quantity longer than 4 bytes", pos)


def _bpm_to_mpqn(bpm: int) -> int:
    return round(60_000_000 / bpm)


def _dedupe_overlaps(notes: list[NoteEvent]) -> tuple[list[NoteEvent], int]:
    """Truncate same-pitch overlaps at the next onset; same-onset duplicates
    keep only the first. Returns (clean notes, number of adjustments)."""
    ordered = sorted(notes)
    adjusted = 0
    by_pitch: dict[int, int] = {}  # pitch -> index of last kept note
    out: list[NoteEvent] = []
    for note in ordered:
        prev_idx = by_pitch.get(note.pitch)
        if prev_idx is not None:
            prev = out[prev_idx]
            if prev.onset == note.onset:
                adjusted += 1
                continue
            if prev.onset + prev.duration > note.onset:
                out[prev_idx] = NoteEvent(
                    prev.onset, prev.pitch, note.onset - prev.onset, prev.velocity
                )
                adjusted += 1
        by_pitch[note.pitch] = len(out)
        out.append(note)
    return out, adjusted


def notes_to_smf(notes, ppq: int = 480, initial_bpm: int = 120) -> bytes:
    """Serialize notes to a format-0 SMF byte string."""
    if ppq <= 0 or ppq > 0x7FFF:
        raise ValueError(f"ppq {ppq} outside (0, 32767]")
    if initial_bpm <= 0:
        raise ValueError(f"bpm {initial_bpm} must be positive")
    clean, adjusted = _dedupe_overlaps(list(notes))
    if adjusted:
        logger.info("truncated %d overlapping same-pitch notes", adjusted)

    # (tick, order, payload); order keeps tempo < note-off < note-on at a tick
    events: list[tuple[int, int, int, bytes]] = [
        (0, 0, 0, bytes((0xFF, 0x51, 0x03)) + _bpm_to_mpqn(initial_bpm).to_bytes(3, "big"))
    ]
    for note in clean:
        events.append((note.onset, 2, note.pitch, bytes((0x90, note.pitch, note.velocity))))
        events.append((note.onset + note.duration, 1, note.pitch, bytes((0x80, note.pitch, 0))))
    events.sort(key=lambda e: (e[0], e[1], e[2]))

    track = bytearray()
    last_tick = 0
    for tick, _, _, payload in events:
        track += _encode_vlq(tick - last_tick)
        track += payload
        last_tick = tick
    track += _encode_vlq(0)
    track += bytes((0xFF, 0x2F, 0x00))

    out = bytearray()
    out += _HEADER_MAGIC
    out += (6).to_bytes(4, "big")
    out += (0).to_bytes(2, "big")
    out += (1).to_bytes(2, "big")
    out += ppq.to_bytes(2, "big")
    out += _TRACK_MAGIC
    out += len(track).to_bytes(4, "big")
    out += track
    return bytes(out)


def _parse_track(data: bytes, start: int, length: int, track_idx: int, raw_notes, tempos):
    """Parse one MTrk body, appending to raw_notes and tempos."""
    pos = start
    end = start + length
    tick = 0
    running_status: int | None = None
    open_notes: dict[tuple[int, int], list[tuple[int, int]]] = {}
    event_idx = 0

    while pos < end:
        delta, pos = _decode_vlq(data, pos)
        tick += delta
        if pos >= end:
            raise SmfParseError("event truncated after delta time", pos)
        byte = data[pos]

        if byte == 0xFF:  # meta
            if pos + 2 > end:
                raise SmfParseError("truncated meta event", pos)
            meta_type = data[pos + 1]
            meta_len, body = _decode_vlq(data, pos + 2)
            if body + meta_len > end:
                raise SmfParseError("meta event overruns track", body)
            if meta_type == 0x51 and meta_len == 3:
                mpqn = int.from_bytes(data[body:body + 3], "big")
                if mpqn > 0:
                    tempos.append((tick, track_idx, event_idx, round(60_000_000 / mpqn)))
            pos = body + meta_len
            running_status = None
            if meta_type == 0x2F:
                break
        elif byte in (0xF0, 0xF7):  # sysex
            sysex_len, body = _decode_vlq(data, pos + 1)
            if body + sysex_len > end:
                raise SmfParseError("sysex event overruns track", body)
            pos = body + sysex_len
            running_status = None
        else:
            if byte & 0x80:
                status = byte
                pos += 1
            elif running_status is not None:
                status = running_status
            else:
                raise SmfParseError(f"data byte {byte:#04x} with no running status", pos)
            running_status = status
            n_data = _CHANNEL_DATA_BYTES.get(status & 0xF0)
            if n_data is None:
                raise SmfParseError(f"unsupported status byte {status:#04x}", pos - 1)
            if pos + n_data > end:
                raise SmfParseError("channel event truncated", pos)
            d1 = data[pos]
            d2 = data[pos + 1] if n_data == 2 else 0
            pos += n_data

            kind = status & 0xF0
            channel = status & 0x0F
            if kind == 0x90 and d2 > 0:
                open_notes.setdefault((channel, d1), []).append((tick, d2))
            elif kind == 0x80 or (kind == 0x90 and d2 == 0):
                stack = open_notes.get((channel, d1))
                if stack:
                    onset, velocity = stack.pop(0)
                    raw_notes.append((onset, d1, max(1, tick - onset), velocity))
        event_idx += 1

    # tolerant close of dangling note-ons at the final tick seen
    for (channel, pitch), stack in open_notes.items():
        for onset, velocity in stack:
            raw_notes.append((onset, pitch, max(1, tick - onset), velocity))
    return end


def parse_smf(data: bytes) -> tuple[list[NoteEvent], int, int | None]:
    """Parse an SMF byte string into (notes, ppq, bpm).

    ``bpm`` is None when the file carries no tempo event. Inverse of
    notes_to_smf on files it produced.
    """
    if len(data) < 14 or data[:4] != _HEADER_MAGIC:
        raise SmfParseError("not a MIDI file (missing MThd)", 0)
    header_len = int.from_bytes(data[4:8], "big")
    if header_len < 6 or 8 + header_len > len(data):
        raise SmfParseError(f"bad header length {header_len}", 4)
    fmt = int.from_bytes(data[8:10], "big")
    if fmt not in (0, 1):
        raise SmfParseError(f"unsupported SMF format {fmt}", 8)
    n_tracks = int.from_bytes(data[10:12], "big")
    division = int.from_bytes(data[12:14], "big")
    if division & 0x8000:
        raise SmfParseError("SMPTE division unsupported", 12)
    if division == 0:
        raise SmfParseError("zero ticks-per-quarter division", 12)

    raw_notes: list[tuple[int, int, int, int]] = []
    tempos: list[tuple[int, int, int, int]] = []
    pos = 8 + header_len
    track_idx = 0
    while pos < len(data) and track_idx < n_tracks:
        if pos + 8 > len(data):
            raise SmfParseError("truncated chunk header", pos)
        magic = data[pos:pos + 4]
        chunk_len = int.from_bytes(data[pos + 4:pos + 8], "big")
        if pos + 8 + chunk_len > len(data):
            raise SmfParseError("chunk overruns file", pos + 4)
        if magic == _TRACK_MAGIC:
            _parse_track(data, pos + 8, chunk_len, track_idx, raw_notes, tempos)
            track_idx += 1
        # unknown chunk types are skipped
        pos += 8 + chunk_len

    notes = sorted(NoteEvent(o, p, d, v) for o, p, d, v in raw_notes)
    bpm = min(tempos)[3] if tempos else None
    return notes, division, bpm
