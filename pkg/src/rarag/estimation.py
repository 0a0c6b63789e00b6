"""Iterative source-reliability estimation.

Starting from unit weights, alternate two steps until the voting weights stop
moving or ``eta_max`` iterations have run:

1. consensus: weighted vote per query over the filtered, clustered responses;
2. reliability: each source's share of answered queries that agree with the
   consensus, rescaled to a voting weight ``v = scale * w_hat - 1``.

Two routes compute the same thing. ``estimate_reliability`` accepts a
:class:`ResponseMatrix` and any equivalence oracle; under the canonical-id
oracle it encodes the matrix and runs the compiled kernels, which is also what
``estimate_codes`` does for the simulator's integer-coded matrices.
"""
from __future__ import annotations

from collections.abc import Callable, Sequence
from dataclasses import dataclass

import numpy as np

from . import kernels
from .aggregation import CANONICAL, EquivalenceOracle, cluster, is_canonical, weighted_majority_vote
from .errors import ConfigError, DegenerateMatrix, DimensionMismatch, LengthMismatch
from .types import IDK, Answer, ResponseMatrix, WeightVector

NEUTRAL = "NEUTRAL"


@dataclass(frozen=True)
class EstimationSettings:
    eta_max: int = 25
    eps_conv: float = 1e-6
    scale: float | None = None  # None means the number of sources
    zero_denominator_policy: str = NEUTRAL

    def __post_init__(self):
        if not (isinstance(self.eta_max, int) and self.eta_max >= 1):
            raise ConfigError(f"eta_max must be >= 1, got {self.eta_max!r}")
        if not self.eps_conv > 0:
            raise ConfigError(f"eps_conv must be > 0, got {self.eps_conv!r}")
        if self.scale is not None and not self.scale > 1:
            raise ConfigError(f"scale must be > 1, got {self.scale!r}")
        if self.zero_denominator_policy != NEUTRAL:
            raise ConfigError(f"unknown zero-denominator policy {self.zero_denominator_policy!r}")

    def scale_for(self, n_sources: int) -> float:
        return float(n_sources if self.scale is None else self.scale)


@dataclass(frozen=True)
class IterationSnapshot:
    v_in: tuple
    consensus: tuple
    w_hat: tuple
    v_out: tuple


@dataclass(frozen=True)
class EstimationTrace:
    snapshots: tuple
    converged: bool

    @property
    def iterations_run(self) -> int:
        return len(self.snapshots)

    @property
    def last_delta(self) -> float:
        s = self.snapshots[-1]
        return max(abs(a - b) for a, b in zip(s.v_out, s.v_in))


def weights_from_counts(num: Sequence[int], den: Sequence[int], scale: float) -> list[float]:
    """Per-source accuracy; a source with no answers gets the neutral ``1/scale``."""
    return [n / d if d > 0 else 1.0 / scale for n, d in zip(num, den)]


def consensus_step(
    matrix: ResponseMatrix, v: WeightVector | Sequence[float], oracle: EquivalenceOracle = CANONICAL
) -> list[Answer]:
    """Weighted-vote answer for every query row (IDK when a row is all IDK)."""
    weights = v.v if isinstance(v, WeightVector) else tuple(v)
    if len(weights) != matrix.n_sources:
        raise DimensionMismatch(f"{len(weights)} weights for {matrix.n_sources} sources")
    if is_canonical(oracle):
        codes, _ = matrix.encode()
        _, col = kernels.vote_rows(codes, np.asarray(weights, dtype=np.float64))
        return [IDK if c < 0 else row[c] for row, c in zip(matrix.cells, col.tolist())]
    return [weighted_majority_vote(cluster(enumerate(row), oracle), weights) for row in matrix.cells]


def reliability_step(
    matrix: ResponseMatrix,
    consensus: Sequence[Answer],
    oracle: EquivalenceOracle = CANONICAL,
    scale: float | None = None,
) -> list[float]:
    """Fraction of each source's non-IDK answers that match the consensus.

    Rows whose consensus is IDK count toward the denominator only.
    """
    if len(consensus) != matrix.n_queries:
        raise LengthMismatch(f"{len(consensus)} consensus answers for {matrix.n_queries} queries")
    scale = float(matrix.n_sources if scale is None else scale)
    oracle = CANONICAL if oracle is None else oracle
    num = [0] * matrix.n_sources
    den = [0] * matrix.n_sources
    for row, y in zip(matrix.cells, consensus):
        for i, cell in enumerate(row):
            if cell.is_idk:
                continue
            den[i] += 1
            if not y.is_idk and oracle(cell, y):
                num[i] += 1
    return weights_from_counts(num, den, scale)


def _iterate(
    n_sources: int,
    consensus_fn: Callable[[tuple], tuple],
    reliability_fn: Callable[[tuple, float], list[float]],
    settings: EstimationSettings,
) -> tuple[WeightVector, EstimationTrace]:
    scale = settings.scale_for(n_sources)
    v = tuple([1.0] * n_sources)
    snapshots = []
    converged = False
    weights = None
    for _ in range(settings.eta_max):
        y = consensus_fn(v)
        w_hat = reliability_fn(y, scale)
        weights = WeightVector.from_w_hat(w_hat, scale)
        snapshots.append(IterationSnapshot(v, tuple(y), weights.w_hat, weights.v))
        delta = max(abs(a - b) for a, b in zip(weights.v, v))
        v = weights.v
        if delta <= settings.eps_conv:
            converged = True
            break
    return weights, EstimationTrace(tuple(snapshots), converged)


def estimate_codes(
    codes: np.ndarray, settings: EstimationSettings | None = None
) -> tuple[WeightVector, EstimationTrace]:
    """Estimate reliabilities from an integer-coded filtered matrix.

    Trace consensus entries are the winning codes (``-1`` for IDK).
    """
    settings = settings or EstimationSettings()
    codes = np.ascontiguousarray(codes, dtype=np.int64)
    if codes.ndim != 2 or codes.shape[0] < 1 or codes.shape[1] < 2:
        raise DimensionMismatch(f"need at least 1 query and 2 sources, got shape {codes.shape}")
    if (codes < 0).all():
        raise DegenerateMatrix("every cell is IDK")

    def consensus_fn(v):
        y, _ = kernels.vote_rows(codes, np.asarray(v, dtype=np.float64))
        return tuple(y.tolist())

    def reliability_fn(y, scale):
        num, den = kernels.reliability_counts(codes, np.asarray(y, dtype=np.int64))
        return weights_from_counts(num.tolist(), den.tolist(), scale)

    return _iterate(codes.shape[1], consensus_fn, reliability_fn, settings)


def estimate_reliability(
    matrix: ResponseMatrix,
    settings: EstimationSettings | None = None,
    oracle: EquivalenceOracle = CANONICAL,
) -> tuple[WeightVector, EstimationTrace]:
    settings = settings or EstimationSettings()
    if matrix.n_queries < 1 or matrix.n_sources < 2:
        raise DimensionMismatch("need at least 1 query and 2 sources")
    if all(cell.is_idk for row in matrix.cells for cell in row):
        raise DegenerateMatrix("every cell is IDK")

    if is_canonical(oracle):
        codes, _ = matrix.encode()
        weights, trace = estimate_codes(codes, settings)
        # Report consensus as answers, not codes.
        snaps = []
        for s in trace.snapshots:
            _, col = kernels.vote_rows(codes, np.asarray(s.v_in, dtype=np.float64))
            y = tuple(IDK if c < 0 else row[c] for row, c in zip(matrix.cells, col.tolist()))
            snaps.append(IterationSnapshot(s.v_in, y, s.w_hat, s.v_out))
        return weights, EstimationTrace(tuple(snaps), trace.converged)

    return _iterate(
        matrix.n_sources,
        lambda v: tuple(consensus_step(matrix, v, oracle)),
        lambda y, scale: reliability_step(matrix, y, oracle, scale),
        settings,
    )
