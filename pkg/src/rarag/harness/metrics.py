"""Accuracy, correlation and cost metrics."""
from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np
from scipy import stats

from ..errors import DegenerateVariance, LengthMismatch
from ..types import Answer, CostModel, ProbeLog


def _contains_any(surface: str, aliases) -> bool:
    text = surface.casefold()
    if isinstance(aliases, str):
        aliases = (aliases,)
    return any(a.casefold() in text for a in aliases)


def accuracy(predictions: Sequence[Answer], gold: Sequence, mode: str = "canonical") -> float:
    """Fraction of predictions that are correct; IDK always counts as wrong.

    ``mode="canonical"`` compares canonical ids with ``gold`` ids (simulation).
    ``mode="text"`` checks whether any gold alias appears, case-insensitively,
    in the predicted surface; each ``gold`` item is a string or a list of
    aliases.
    """
    if len(predictions) != len(gold):
        raise LengthMismatch(f"{len(predictions)} predictions for {len(gold)} gold answers")
    if not predictions:
        return 0.0
    if mode == "canonical":
        hits = sum(not a.is_idk and a.canonical_id == g for a, g in zip(predictions, gold))
    elif mode == "text":
        hits = sum(not a.is_idk and _contains_any(a.surface, g) for a, g in zip(predictions, gold))
    else:
        raise ValueError(f"unknown accuracy mode {mode!r}")
    return hits / len(predictions)


def correlation(est: Sequence[float], truth: Sequence[float]) -> tuple[float, float]:
    """Pearson and Spearman correlation of estimated against true reliability."""
    x = np.asarray(est, dtype=np.float64)
    y = np.asarray(truth, dtype=np.float64)
    if x.shape != y.shape:
        raise LengthMismatch(f"lengths {x.size} and {y.size} differ")
    if x.size < 3:
        raise LengthMismatch("correlation needs at least 3 points")
    if np.ptp(x) == 0 or np.ptp(y) == 0:
        raise DegenerateVariance("a constant vector has no correlation")
    pcc = float(stats.pearsonr(x, y)[0])
    srcc = float(stats.spearmanr(x, y)[0])
    return max(-1.0, min(1.0, pcc)), max(-1.0, min(1.0, srcc))


@dataclass(frozen=True)
class CostSummary:
    tokens_per_query: float
    calls_per_query: float
    dollars_per_query: float


def cost_from_calls(calls_per_query: float, model: CostModel) -> CostSummary:
    tokens = calls_per_query * model.tokens_per_call
    return CostSummary(tokens, calls_per_query, tokens * model.price_per_token)


def cost_report(logs: Sequence[ProbeLog], model: CostModel | None = None) -> CostSummary:
    """Mean per-query cost of a batch of probe logs under a linear cost model."""
    model = model or CostModel()
    if not logs:
        return CostSummary(0.0, 0.0, 0.0)
    calls = sum(log.probes_made for log in logs) / len(logs)
    return cost_from_calls(calls, model)


def reduction(with_selection: float, without_selection: float) -> float:
    """Relative saving, e.g. ``0.991`` for a 99.1% cut."""
    return 1.0 - with_selection / without_selection
