# cython: language_level=3
"""Compiled hot kernels. Same API and results as ``_kernels_py``."""
import numpy as np
cimport numpy as cnp
from libc.stdint cimport uint64_t, int64_t

cnp.import_array()

cdef uint64_t _GOLDEN = 0x9E3779B97F4A7C15ULL
cdef uint64_t _MUL1 = 0xBF58476D1CE4E5B9ULL
cdef uint64_t _MUL2 = 0x94D049BB133111EBULL
cdef double _INV_2_53 = 1.0 / 9007199254740992.0
MASK64 = 0xFFFFFFFFFFFFFFFF


cdef inline uint64_t _sm(uint64_t x) nogil:
    x = x + _GOLDEN
    x = (x ^ (x >> 30)) * _MUL1
    x = (x ^ (x >> 27)) * _MUL2
    return x ^ (x >> 31)


def splitmix64(x):
    return _sm(<uint64_t>(x & MASK64))


def hash64(seed, a, b, stream):
    cdef uint64_t h = _sm(<uint64_t>(seed & MASK64))
    h = _sm(h ^ <uint64_t>(a & MASK64))
    h = _sm(h ^ <uint64_t>(b & MASK64))
    return _sm(h ^ <uint64_t>(stream & MASK64))


def uniform_grid(seed, rows, sources, stream):
    cdef int64_t[::1] rv = np.ascontiguousarray(rows, dtype=np.int64)
    cdef int64_t[::1] sv = np.ascontiguousarray(sources, dtype=np.int64)
    cdef Py_ssize_t nr = rv.shape[0], ns = sv.shape[0], k, c
    out = np.empty((nr, ns), dtype=np.float64)
    cdef double[:, ::1] ov = out
    cdef uint64_t h0 = _sm(<uint64_t>(seed & MASK64))
    cdef uint64_t st = <uint64_t>(stream & MASK64)
    cdef uint64_t hs, h
    with nogil:
        for c in range(ns):
            hs = _sm(h0 ^ <uint64_t>sv[c])
            for k in range(nr):
                h = _sm(_sm(hs ^ <uint64_t>rv[k]) ^ st)
                ov[k, c] = <double>(h >> 11) * _INV_2_53
    return out


cdef inline void _vote(const int64_t* row_codes, const double* row_w, const int64_t* row_cols,
                       Py_ssize_t n, int64_t* ccode, double* cscore, int64_t* cfirst,
                       int64_t* out_code, int64_t* out_col) noexcept nogil:
    cdef Py_ssize_t i, k, K = 0, best
    cdef int64_t c
    for i in range(n):
        c = row_codes[i]
        if c < 0:
            continue
        for k in range(K):
            if ccode[k] == c:
                cscore[k] += row_w[i]
                break
        else:
            ccode[K] = c
            cscore[K] = row_w[i]
            cfirst[K] = row_cols[i]
            K += 1
    if K == 0:
        out_code[0] = -1
        out_col[0] = -1
        return
    best = 0
    for k in range(1, K):
        if cscore[k] > cscore[best]:
            best = k
    out_code[0] = ccode[best]
    out_col[0] = cfirst[best]


def vote_rows(codes, weights):
    cdef int64_t[:, ::1] cv = np.ascontiguousarray(codes, dtype=np.int64)
    cdef double[::1] wv = np.ascontiguousarray(weights, dtype=np.float64)
    cdef Py_ssize_t nr = cv.shape[0], nc = cv.shape[1], r
    win_code = np.full(nr, -1, dtype=np.int64)
    win_col = np.full(nr, -1, dtype=np.int64)
    cdef int64_t[::1] wc = win_code, wl = win_col
    cdef int64_t[::1] cols = np.arange(nc, dtype=np.int64)
    cdef int64_t[::1] ccode = np.empty(max(nc, 1), dtype=np.int64)
    cdef double[::1] cscore = np.empty(max(nc, 1), dtype=np.float64)
    cdef int64_t[::1] cfirst = np.empty(max(nc, 1), dtype=np.int64)
    if nc == 0:
        return win_code, win_col
    with nogil:
        for r in range(nr):
            _vote(&cv[r, 0], &wv[0], &cols[0], nc, &ccode[0], &cscore[0], &cfirst[0],
                  &wc[r], &wl[r])
    return win_code, win_col


def reliability_counts(codes, consensus):
    cdef int64_t[:, ::1] cv = np.ascontiguousarray(codes, dtype=np.int64)
    cdef int64_t[::1] yv = np.ascontiguousarray(consensus, dtype=np.int64)
    cdef Py_ssize_t nr = cv.shape[0], nc = cv.shape[1], r, i
    num = np.zeros(nc, dtype=np.int64)
    den = np.zeros(nc, dtype=np.int64)
    cdef int64_t[::1] nv = num, dv = den
    cdef int64_t c, y
    with nogil:
        for r in range(nr):
            y = yv[r]
            for i in range(nc):
                c = cv[r, i]
                if c < 0:
                    continue
                dv[i] += 1
                if y >= 0 and c == y:
                    nv[i] += 1
    return num, den


def select_rows(codes, order, weights, long kappa, bint relevance):
    cdef int64_t[:, ::1] cv = np.ascontiguousarray(codes, dtype=np.int64)
    cdef int64_t[::1] ov = np.ascontiguousarray(order, dtype=np.int64)
    cdef double[::1] wv = np.ascontiguousarray(weights, dtype=np.float64)
    cdef Py_ssize_t nr = cv.shape[0], no = ov.shape[0], r, j
    cdef Py_ssize_t limit = kappa if kappa < no else no
    win_code = np.full(nr, -1, dtype=np.int64)
    win_col = np.full(nr, -1, dtype=np.int64)
    probes = np.zeros(nr, dtype=np.int64)
    n_sel = np.zeros(nr, dtype=np.int64)
    cdef int64_t[::1] wc = win_code, wl = win_col, pv = probes, sv = n_sel
    cdef Py_ssize_t buf = no if no > 0 else 1
    cdef int64_t[::1] pcode = np.empty(buf, dtype=np.int64)
    cdef double[::1] pw = np.empty(buf, dtype=np.float64)
    cdef int64_t[::1] pcol = np.empty(buf, dtype=np.int64)
    cdef int64_t[::1] ccode = np.empty(buf, dtype=np.int64)
    cdef double[::1] cscore = np.empty(buf, dtype=np.float64)
    cdef int64_t[::1] cfirst = np.empty(buf, dtype=np.int64)
    cdef Py_ssize_t made, npick
    cdef int64_t col, c
    with nogil:
        for r in range(nr):
            made = 0
            npick = 0
            for j in range(no):
                if not relevance and made >= limit:
                    break
                made += 1
                col = ov[j]
                c = cv[r, col]
                if c >= 0:
                    pcode[npick] = c
                    pw[npick] = wv[col]
                    pcol[npick] = col
                    npick += 1
                    if relevance and npick == kappa:
                        break
            pv[r] = made
            sv[r] = npick if relevance else made
            _vote(&pcode[0], &pw[0], &pcol[0], npick, &ccode[0], &cscore[0], &cfirst[0],
                  &wc[r], &wl[r])
    return win_code, win_col, probes, n_sel
