"""Cost-bounded source selection at inference time.

``kappa_rrss`` walks the sources from most to least trusted and stops once it
holds ``kappa`` answers that survived the alignment filter. ``kappa_rss`` is
the ablation that just takes the ``kappa`` most trusted sources, answered or
not. Either way the collected responses go through ``aggregate_kappa``.
"""
from __future__ import annotations

from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Protocol, runtime_checkable

import numpy as np

from .aggregation import CANONICAL, EquivalenceOracle, cluster, filter_response, weighted_majority_vote
from .errors import ConfigError, ProviderFailure
from .types import Answer, ProbeEntry, ProbeLog, WeightVector


@dataclass(frozen=True)
class ProviderReply:
    answer: Answer
    alignment_score: float


@runtime_checkable
class Provider(Protocol):
    """Anything that can answer one query from one source.

    Implementations raise :class:`ProviderFailure` on transport or protocol
    errors; they must never report a failure as IDK.
    """

    n_sources: int

    def probe(self, query_id: int, source_id: int) -> ProviderReply: ...


def probe_order(v: WeightVector | Sequence[float]) -> list[int]:
    """Source ids by descending weight, ties by ascending id."""
    weights = np.asarray(v.v if isinstance(v, WeightVector) else v, dtype=np.float64)
    return np.lexsort((np.arange(len(weights)), -weights)).tolist()


def _checked(provider: Provider, query_id: int, source_id: int) -> ProviderReply:
    reply = provider.probe(query_id, source_id)
    score = reply.alignment_score
    if not isinstance(reply.answer, Answer) or not (0.0 <= score <= 1.0):
        raise ProviderFailure(source_id, f"invalid reply {reply!r}")
    return reply


def _check_kappa(kappa: int) -> None:
    if not (isinstance(kappa, (int, np.integer)) and kappa >= 1):
        raise ConfigError(f"kappa must be >= 1, got {kappa!r}")


def kappa_rrss(
    query_id: int, v: WeightVector | Sequence[float], kappa: int, provider: Provider, tau: float
) -> tuple[list[tuple[int, Answer]], ProbeLog]:
    """Probe sources in trust order until ``kappa`` non-IDK filtered answers are held.

    Returns the selected ``(source_id, answer)`` pairs in probe order and the
    full probe log. If fewer than ``kappa`` sources answer, every source is
    probed and the partial set is returned.
    """
    _check_kappa(kappa)
    selected: list[tuple[int, Answer]] = []
    entries = []
    for sid in probe_order(v):
        reply = _checked(provider, query_id, sid)
        ans = filter_response(reply.answer, reply.alignment_score, tau)
        keep = not ans.is_idk
        entries.append(ProbeEntry(sid, ans, keep))
        if keep:
            selected.append((sid, ans))
            if len(selected) == kappa:
                break
    return selected, ProbeLog(entries)


def kappa_rss(
    query_id: int,
    v: WeightVector | Sequence[float],
    kappa: int,
    provider: Provider,
    tau: float,
    max_in_flight: int = 1,
) -> tuple[list[tuple[int, Answer]], ProbeLog]:
    """Probe exactly the ``min(kappa, N)`` most trusted sources.

    Every probed entry is marked selected; IDK answers among them simply drop
    out at clustering. With ``max_in_flight > 1`` the probes run concurrently
    but results are reduced in trust order.
    """
    _check_kappa(kappa)
    top = probe_order(v)[:kappa]
    if max_in_flight > 1 and len(top) > 1:
        with ThreadPoolExecutor(max_workers=max_in_flight) as pool:
            replies = list(pool.map(lambda s: _checked(provider, query_id, s), top))
    else:
        replies = [_checked(provider, query_id, s) for s in top]
    responses = [(s, filter_response(r.answer, r.alignment_score, tau)) for s, r in zip(top, replies)]
    return responses, ProbeLog(ProbeEntry(s, a, True) for s, a in responses)


def aggregate_kappa(
    responses: Sequence[tuple[int, Answer]],
    v: WeightVector | Sequence[float],
    oracle: EquivalenceOracle = CANONICAL,
) -> Answer:
    """Cluster the selected responses (in the given order) and take the weighted vote."""
    return weighted_majority_vote(cluster(responses, oracle), v)
