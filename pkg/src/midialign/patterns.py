"""Point-set pattern compression for long-term-structure scoring.

Notes become integer (onset, pitch) points on a 1/32-note grid. A greedy
cover then repeatedly finds the maximal translatable pattern that best
compresses the remaining points and removes its occurrences; the
compression ratio is total points over the summed cost of the chosen
patterns, where one pattern costs |pattern| + |translators| - 1.

The inner pattern search is the hot kernel. A compiled extension
(midialign._siatec_c) is used when available; set MIDIALIGN_PURE_PYTHON=1
to force the pure-Python twin. Both produce identical output.
"""

from __future__ import annotations

import os

from midialign import _siatec_py

if os.environ.get("MIDIALIGN_PURE_PYTHON"):
    _kernel = _siatec_py
else:
    try:
        from midialign import _siatec_c as _kernel
    except ImportError:
        _kernel = _siatec_py

KERNEL_NAME = _kernel.__name__.rsplit(".", 1)[-1]

from midialign.midi.tokens import DEFAULT_PPQ

GRID_DIVISIONS_PER_QUARTER = 8  # 1/32-note onset grid


def notes_to_points(notes, ppq: int = DEFAULT_PPQ) -> list[tuple[int, int]]:
    """Quantize notes to sorted unique (grid onset, pitch) points."""
    pts = {
        ((GRID_DIVISIONS_PER_QUARTER * n.onset + ppq // 2) // ppq, n.pitch)
        for n in notes
    }
    return sorted(pts)


def cover_step(points, kernel=None):
    """One greedy iteration; see the kernel docstring for the contract."""
    return (kernel or _kernel).cover_step(points)


def cosiatec(points, kernel=None):
    """Greedy full cover of a point set.

    Returns a list of (pattern, translators) whose occurrences partition
    the input points. Raises on an empty input.
    """
    if kernel is None:
        kernel = _kernel
    remaining = sorted(set(points))
    if not remaining:
        raise ValueError("cosiatec needs at least one point")
    total = len(remaining)
    chosen = []
    covered_total = 0
    while remaining:
        try:
            pattern, translators, covered = kernel.cover_step(remaining)
        except ValueError:
            if kernel is _siatec_py:
                raise
            pattern, translators, covered = _siatec_py.cover_step(remaining)
        chosen.append((pattern, translators))
        covered_set = set(covered)
        covered_total += len(covered_set)
        next_remaining = [p for p in remaining if p not in covered_set]
        if len(next_remaining) == len(remaining):
            raise RuntimeError("cover made no progress")  # unreachable
        remaining = next_remaining
    if covered_total != total:
        raise RuntimeError("cover is not exact")  # unreachable
    return chosen


def cover_cost(cover) -> int:
    return sum(len(pattern) + len(translators) - 1 for pattern, translators in cover)


def compression_ratio(notes, ppq: int = DEFAULT_PPQ, kernel=None) -> float:
    """Points over cover cost; 1.0 means no compressible structure."""
    points = notes_to_points(notes, ppq)
    if not points:
        raise ValueError("compression ratio needs at least one note")
    cover = cosiatec(points, kernel=kernel)
    return len(points) / cover_cost(cover)
