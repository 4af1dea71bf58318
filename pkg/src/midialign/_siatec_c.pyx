# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled pattern-discovery kernel; bit-exact mirror of _siatec_py.

Same algorithm, same tie rules, same return layout. Points are encoded
into int64 keys for C-level hashing; inputs whose coordinate spans would
overflow the encoding raise ValueError and the caller falls back to the
pure-Python kernel.
"""

from libc.stdint cimport int64_t
from libcpp.algorithm cimport sort
from libcpp.pair cimport pair
from libcpp.unordered_set cimport unordered_set
from libcpp.vector cimport vector

ctypedef pair[int64_t, int64_t] ipair


def cover_step(points):
    """See _siatec_py.cover_step; this is its compiled twin."""
    if not points:
        raise ValueError("cover_step needs at least one point")

    cdef Py_ssize_t n = len(points)
    cdef vector[int64_t] xs, ys
    xs.reserve(n)
    ys.reserve(n)
    for px, py in points:
        xs.push_back(px)
        ys.push_back(py)

    cdef Py_ssize_t i, j, t, q
    cdef int64_t xmin = xs[0], xmax = xs[0], ymin = ys[0], ymax = ys[0]
    for i in range(1, n):
        if xs[i] < xmin: xmin = xs[i]
        if xs[i] > xmax: xmax = xs[i]
        if ys[i] < ymin: ymin = ys[i]
        if ys[i] > ymax: ymax = ys[i]

    # membership keys must stay injective over the padded query box
    cdef int64_t xspan = xmax - xmin + 1
    cdef int64_t yspan = ymax - ymin + 1
    cdef int64_t m = 4 * yspan + 4
    cdef int64_t xlo = xmin - xspan - 1
    cdef int64_t ylo = ymin - yspan - 1
    if m > (<int64_t>1 << 62) / (3 * xspan + 3):
        raise ValueError("point span too large for compiled kernel")

    cdef unordered_set[int64_t] keyset
    keyset.reserve(2 * n)
    for i in range(n):
        keyset.insert((xs[i] - xlo) * m + (ys[i] - ylo))

    # difference-vector grouping: (dv_key, source index), sorted
    cdef int64_t m2 = 2 * yspan + 1
    cdef vector[ipair] diffs
    diffs.reserve(n * (n - 1) // 2)
    for i in range(n):
        for j in range(i + 1, n):
            diffs.push_back(ipair(
                (xs[j] - xs[i]) * m2 + (ys[j] - ys[i]) + yspan, i))
    sort(diffs.begin(), diffs.end())

    # dedupe translationally equivalent patterns by normal form
    reps = {}
    cdef Py_ssize_t start = 0, end, base
    cdef Py_ssize_t total = diffs.size()
    cdef list norm_list, source_list
    while start < total:
        end = start
        while end < total and diffs[end].first == diffs[start].first:
            end += 1
        base = diffs[start].second
        norm_list = []
        source_list = []
        for t in range(start, end):
            i = diffs[t].second
            norm_list.append((xs[i] - xs[base]) * m2 + (ys[i] - ys[base]) + yspan)
            source_list.append(i)
        norm = tuple(norm_list)
        if norm not in reps:
            reps[norm] = source_list
        start = end

    candidates = list(reps.values())
    candidates.append(list(range(n)))  # whole-set fallback, translators = {0}

    cdef vector[Py_ssize_t] idx, best_idx
    cdef vector[ipair] translators, best_translators
    cdef unordered_set[int64_t] covered
    cdef int64_t wx, wy, lhs, rhs, cov, cost
    cdef Py_ssize_t k
    cdef bint ok, take
    cdef int64_t best_cov = -1, best_cost = -1
    best_canonical = None

    for cand in candidates:
        k = len(cand)
        idx.clear()
        for item in cand:
            idx.push_back(item)

        translators.clear()
        for q in range(n):
            wx = xs[q] - xs[idx[0]]
            wy = ys[q] - ys[idx[0]]
            ok = True
            for t in range(1, k):
                if keyset.count((xs[idx[t]] + wx - xlo) * m + (ys[idx[t]] + wy - ylo)) == 0:
                    ok = False
                    break
            if ok:
                translators.push_back(ipair(wx, wy))

        covered.clear()
        for i in range(<Py_ssize_t>translators.size()):
            wx = translators[i].first
            wy = translators[i].second
            for t in range(k):
                covered.insert((xs[idx[t]] + wx - xlo) * m + (ys[idx[t]] + wy - ylo))

        cov = <int64_t>covered.size()
        cost = <int64_t>k + <int64_t>translators.size() - 1
        take = False
        new_canonical = None
        if best_cov < 0:
            take = True
        else:
            # coverage/cost vs best, compared exactly
            lhs = cov * best_cost
            rhs = best_cov * cost
            if lhs > rhs:
                take = True
            elif lhs == rhs:
                if cov > best_cov:
                    take = True
                elif cov == best_cov:
                    canonical = _canonical_tuple(xs, ys, idx, translators)
                    if best_canonical is None:
                        best_canonical = _canonical_tuple(
                            xs, ys, best_idx, best_translators)
                    if canonical < best_canonical:
                        take = True
                        new_canonical = canonical
        if take:
            best_cov = cov
            best_cost = cost
            best_idx = idx
            best_translators = translators
            best_canonical = new_canonical

    pattern = _canonical_tuple(xs, ys, best_idx, best_translators)
    cdef int64_t w0x = best_translators[0].first
    cdef int64_t w0y = best_translators[0].second
    out_translators = []
    for i in range(<Py_ssize_t>best_translators.size()):
        out_translators.append(
            (best_translators[i].first - w0x, best_translators[i].second - w0y))
    covered_py = set()
    for pt in pattern:
        for wt in out_translators:
            covered_py.add((pt[0] + wt[0], pt[1] + wt[1]))
    return list(pattern), out_translators, sorted(covered_py)


cdef _canonical_tuple(vector[int64_t]& xs, vector[int64_t]& ys,
                      vector[Py_ssize_t]& idx, vector[ipair]& translators):
    """Pattern shifted to its smallest translator position, as a tuple."""
    cdef int64_t w0x = translators[0].first
    cdef int64_t w0y = translators[0].second
    cdef Py_ssize_t t
    cdef list out = []
    for t in range(<Py_ssize_t>idx.size()):
        out.append((xs[idx[t]] + w0x, ys[idx[t]] + w0y))
    return tuple(out)
