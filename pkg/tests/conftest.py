"""Shared test helpers."""

from __future__ import annotations

import random

import pytest

from midialign.midi.tokens import NoteEvent


def make_random_notes(rng: random.Random, count: int, max_onset: int = 8000,
                      ppq: int = 480) -> list[NoteEvent]:
    """Sorted notes with no same-pitch overlap (the writer's identity domain)."""
    raw = []
    for _ in range(count):
        raw.append(NoteEvent(
            onset=rng.randrange(0, max_onset),
            pitch=rng.randrange(0, 128),
            duration=rng.randrange(1, 2 * ppq),
            velocity=rng.randrange(1, 128),
        ))
    raw.sort()
    out: list[NoteEvent] = []
    last_end: dict[int, int] = {}
    for note in raw:
        if last_end.get(note.pitch, -1) > note.onset:
            continue
        if last_end.get(note.pitch, -1) == note.onset:
            continue  # writer keeps only the first of same-onset duplicates
        out.append(note)
        last_end[note.pitch] = note.onset + note.duration
    return out


@pytest.fixture
def rng():
    return random.Random(0xC0FFEE)
