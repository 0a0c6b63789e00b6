"""Answer combination for a single query: filter, cluster, weighted vote."""
from __future__ import annotations

from collections.abc import Callable, Iterable, Sequence

import numpy as np

from . import kernels
from .errors import SourceIndexOutOfRange
from .types import IDK, Answer, ClusterSet, ResponseRecord, WeightVector

EquivalenceOracle = Callable[[Answer, Answer], bool]

FIRST_CLUSTER = "FIRST_CLUSTER"


class CanonicalOracle:
    """Two text answers are equivalent iff their canonical ids match."""

    def __call__(self, a: Answer, b: Answer) -> bool:
        return a.canonical_id == b.canonical_id

    def __repr__(self) -> str:
        return "CanonicalOracle()"


CANONICAL = CanonicalOracle()


def is_canonical(oracle) -> bool:
    return oracle is None or isinstance(oracle, CanonicalOracle)


def filter_response(raw: Answer, alignment_score: float, tau: float) -> Answer:
    """Replace a response with IDK when its alignment score is below ``tau``.

    The comparison is strict: a score exactly equal to ``tau`` passes.
    """
    if raw.is_idk or alignment_score < tau:
        return IDK
    return raw


def cluster(responses: Iterable[tuple[int, Answer]], oracle: EquivalenceOracle = CANONICAL) -> ClusterSet:
    """Greedy one-pass clustering of the text responses.

    Each response is compared with the first member of every existing
    cluster, in creation order, and joins the first match. IDK entries are
    dropped.
    """
    oracle = CANONICAL if oracle is None else oracle
    groups: list[list[tuple[int, Answer]]] = []
    for sid, ans in responses:
        if ans.is_idk:
            continue
        for g in groups:
            if oracle(g[0][1], ans):
                g.append((sid, ans))
                break
        else:
            groups.append([(sid, ans)])
    return ClusterSet(groups)


def _as_weights(v: WeightVector | Sequence[float]) -> Sequence[float]:
    return v.v if isinstance(v, WeightVector) else v


def cluster_scores(clusters: ClusterSet, v: WeightVector | Sequence[float], clamp_negative: bool = False) -> list[float]:
    weights = _as_weights(v)
    n = len(weights)
    out = []
    for c in clusters:
        s = 0.0
        for sid, _ in c:
            if not 0 <= sid < n:
                raise SourceIndexOutOfRange(f"source {sid} has no weight (n={n})")
            w = float(weights[sid])
            s += max(w, 0.0) if clamp_negative else w
        out.append(s)
    return out


def weighted_majority_vote(
    clusters: ClusterSet,
    v: WeightVector | Sequence[float],
    tie_break: str = FIRST_CLUSTER,
    clamp_negative: bool = False,
) -> Answer:
    """First response of the cluster with the largest summed weight.

    Ties go to the earliest-created cluster. Negative weights vote against a
    cluster; ``clamp_negative`` floors each weight at zero instead.
    """
    if tie_break != FIRST_CLUSTER:
        raise ValueError(f"unsupported tie-break policy {tie_break!r}")
    scores = cluster_scores(clusters, v, clamp_negative)
    if not scores:
        return IDK
    best = 0
    for k in range(1, len(scores)):
        if scores[k] > scores[best]:
            best = k
    return clusters.clusters[best][0][1]


def majority_vote(clusters: ClusterSet, n_sources: int) -> Answer:
    return weighted_majority_vote(clusters, [1.0] * n_sources)


def aggregate(
    records: Sequence[ResponseRecord],
    v: WeightVector | Sequence[float],
    tau: float,
    oracle: EquivalenceOracle = CANONICAL,
    clamp_negative: bool = False,
) -> Answer:
    """Filter, cluster and vote over one query's responses."""
    if len({r.query_id for r in records}) > 1:
        raise ValueError("records span more than one query")
    filtered = [(r.source_id, filter_response(r.raw_answer, r.alignment_score, tau)) for r in records]
    return weighted_majority_vote(cluster(filtered, oracle), v, clamp_negative=clamp_negative)


def vote_codes(codes: np.ndarray, weights: Sequence[float]) -> tuple[np.ndarray, np.ndarray]:
    """Row-wise weighted vote over an integer-coded response matrix.

    Equivalent to :func:`weighted_majority_vote` under canonical-id equality;
    returns the winning code (``-1`` for IDK) and representative column.
    """
    codes = np.asarray(codes, dtype=np.int64)
    w = np.asarray(weights, dtype=np.float64)
    if codes.ndim != 2 or codes.shape[1] != w.shape[0]:
        raise SourceIndexOutOfRange(f"codes {codes.shape} vs {w.shape[0]} weights")
    return kernels.vote_rows(codes, w)
