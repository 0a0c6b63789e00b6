"""Pure-Python/numpy implementation of the hot kernels.

Mirrors ``_kernels.pyx`` exactly, including floating-point summation order,
so the two backends return bit-identical results.
"""
from __future__ import annotations

import numpy as np

MASK64 = 0xFFFFFFFFFFFFFFFF
_GOLDEN = 0x9E3779B97F4A7C15
_MUL1 = 0xBF58476D1CE4E5B9
_MUL2 = 0x94D049BB133111EB
_INV_2_53 = 1.0 / 9007199254740992.0


def splitmix64(x: int) -> int:
    x = (x + _GOLDEN) & MASK64
    x = ((x ^ (x >> 30)) * _MUL1) & MASK64
    x = ((x ^ (x >> 27)) * _MUL2) & MASK64
    return x ^ (x >> 31)


def hash64(seed: int, a: int, b: int, stream: int) -> int:
    h = splitmix64(seed & MASK64)
    h = splitmix64(h ^ (a & MASK64))
    h = splitmix64(h ^ (b & MASK64))
    return splitmix64(h ^ (stream & MASK64))


def _splitmix64_array(x: np.ndarray) -> np.ndarray:
    x = x + np.uint64(_GOLDEN)
    x = (x ^ (x >> np.uint64(30))) * np.uint64(_MUL1)
    x = (x ^ (x >> np.uint64(27))) * np.uint64(_MUL2)
    return x ^ (x >> np.uint64(31))


def uniform_grid(seed: int, rows, sources, stream: int) -> np.ndarray:
    """Uniform [0, 1) draws keyed by (seed, source, row, stream).

    Element ``[k, c]`` equals ``hash64(seed, sources[c], rows[k], stream)``
    mapped to 53-bit precision.
    """
    rows = np.asarray(rows, dtype=np.int64).astype(np.uint64)
    sources = np.asarray(sources, dtype=np.int64).astype(np.uint64)
    with np.errstate(over="ignore"):
        h0 = _splitmix64_array(np.array([seed & MASK64], dtype=np.uint64))
        hs = _splitmix64_array(h0 ^ sources)
        h = _splitmix64_array(hs[None, :] ^ rows[:, None])
        h = _splitmix64_array(h ^ np.uint64(stream & MASK64))
    return (h >> np.uint64(11)).astype(np.float64) * _INV_2_53


def _vote(codes_row, weights_row, cols):
    """Weighted plurality over one row; first-created cluster wins ties."""
    scores: dict[int, float] = {}
    first: dict[int, int] = {}
    for c, w, col in zip(codes_row, weights_row, cols):
        if c < 0:
            continue
        if c in scores:
            scores[c] += w
        else:
            scores[c] = w
            first[c] = col
    best_code = -1
    best_score = 0.0
    for c, s in scores.items():
        if best_code < 0 or s > best_score:
            best_code = c
            best_score = s
    if best_code < 0:
        return -1, -1
    return best_code, first[best_code]


def vote_rows(codes, weights):
    codes = np.asarray(codes, dtype=np.int64)
    w = [float(x) for x in np.asarray(weights, dtype=np.float64)]
    n_rows, n_cols = codes.shape
    win_code = np.full(n_rows, -1, dtype=np.int64)
    win_col = np.full(n_rows, -1, dtype=np.int64)
    cols = range(n_cols)
    for r, row in enumerate(codes.tolist()):
        win_code[r], win_col[r] = _vote(row, w, cols)
    return win_code, win_col


def reliability_counts(codes, consensus):
    codes = np.asarray(codes, dtype=np.int64)
    consensus = np.asarray(consensus, dtype=np.int64)
    n_cols = codes.shape[1]
    num = [0] * n_cols
    den = [0] * n_cols
    for row, cons in zip(codes.tolist(), consensus.tolist()):
        for i, c in enumerate(row):
            if c < 0:
                continue
            den[i] += 1
            if cons >= 0 and c == cons:
                num[i] += 1
    return np.array(num, dtype=np.int64), np.array(den, dtype=np.int64)


def select_rows(codes, order, weights, kappa: int, relevance: bool):
    """Source selection followed by a weighted vote, row by row.

    With ``relevance`` the columns are probed in ``order`` until ``kappa``
    non-IDK cells are found; without it exactly the first ``kappa`` columns of
    ``order`` are probed. The vote runs over the non-IDK probed cells in probe
    order.
    """
    codes = np.asarray(codes, dtype=np.int64)
    order_l = [int(x) for x in np.asarray(order, dtype=np.int64)]
    w = [float(x) for x in np.asarray(weights, dtype=np.float64)]
    n_rows = codes.shape[0]
    win_code = np.full(n_rows, -1, dtype=np.int64)
    win_col = np.full(n_rows, -1, dtype=np.int64)
    probes = np.zeros(n_rows, dtype=np.int64)
    n_sel = np.zeros(n_rows, dtype=np.int64)
    limit = min(kappa, len(order_l))
    for r, row in enumerate(codes.tolist()):
        picked_codes = []
        picked_w = []
        picked_cols = []
        made = 0
        for col in order_l:
            if not relevance and made >= limit:
                break
            made += 1
            c = row[col]
            if c >= 0:
                picked_codes.append(c)
                picked_w.append(w[col])
                picked_cols.append(col)
                if relevance and len(picked_codes) == kappa:
                    break
        probes[r] = made
        n_sel[r] = len(picked_codes) if relevance else made
        win_code[r], win_col[r] = _vote(picked_codes, picked_w, picked_cols)
    return win_code, win_col, probes, n_sel
