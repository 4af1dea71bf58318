"""Pure-Python pattern-discovery kernel.

One ``cover_step`` call finds, among all maximal translatable patterns of a
point set (plus the whole set itself as a fallback), the pattern whose
occurrences compress the set best. The compiled twin in ``_siatec_c`` must
match this module's output bit for bit; ``midialign.patterns`` picks
between them at import time.
"""

from __future__ import annotations


def _evaluate(pattern, points, pset):
    """Translator set, canonical occurrence, and coverage for one pattern.

    ``pattern`` must be a lexicographically sorted subset of ``points``.
    The canonical occurrence sits at the smallest translator position, so
    translationally equivalent inputs evaluate identically.
    """
    p0 = pattern[0]
    rest = pattern[1:]
    translators = []
    for q in points:
        wx = q[0] - p0[0]
        wy = q[1] - p0[1]
        if all((p[0] + wx, p[1] + wy) in pset for p in rest):
            translators.append((wx, wy))
    w0x, w0y = translators[0]
    canonical = tuple((p[0] + w0x, p[1] + w0y) for p in pattern)
    shifted = tuple((wx - w0x, wy - w0y) for wx, wy in translators)
    covered = sorted({(p[0] + wx, p[1] + wy) for p in canonical for wx, wy in shifted})
    return canonical, shifted, covered


def cover_step(points):
    """One greedy cover iteration.

    ``points`` is a lexicographically sorted list of unique (x, y) int
    pairs. Returns (pattern, translators, covered): the canonical
    occurrence of the winning pattern, its translator set (sorted, first
    entry (0, 0)), and the sorted union of all its occurrences.

    Selection maximizes coverage / (|pattern| + |translators| - 1); ties
    break to larger coverage, then to the lexicographically smaller
    canonical pattern. Ratio comparisons use integer cross-multiplication
    so ties are exact.
    """
    if not points:
        raise ValueError("cover_step needs at least one point")
    pset = set(points)

    # group difference-vector source points: MTP(v) = {p : p + v in D}
    mtps: dict[tuple[int, int], list[tuple[int, int]]] = {}
    for i, (xi, yi) in enumerate(points):
        for j in range(i + 1, len(points)):
            v = (points[j][0] - xi, points[j][1] - yi)
            mtps.setdefault(v, []).append(points[i])

    # translationally equivalent patterns share a normal form; keep one each
    reps: dict[tuple, list[tuple[int, int]]] = {}
    for sources in mtps.values():
        bx, by = sources[0]
        norm = tuple((x - bx, y - by) for x, y in sources)
        reps.setdefault(norm, sources)

    candidates = list(reps.values())
    candidates.append(list(points))  # whole-set fallback, translators = {0}

    best = None
    for pattern in candidates:
        canonical, translators, covered = _evaluate(tuple(pattern), points, pset)
        cost = len(canonical) + len(translators) - 1
        coverage = len(covered)
        if best is None:
            best = (coverage, cost, canonical, translators, covered)
            continue
        b_cov, b_cost = best[0], best[1]
        # coverage/cost > b_cov/b_cost, exactly
        lhs = coverage * b_cost
        rhs = b_cov * cost
        if lhs > rhs or (lhs == rhs and (coverage > b_cov or
                                         (coverage == b_cov and canonical < best[2]))):
            best = (coverage, cost, canonical, translators, covered)

    _, _, canonical, translators, covered = best
    return list(canonical), list(translators), list(covered)
