"""Reliability-aware aggregation of answers from many sources of uneven quality."""
__version__ = "0.1.0"

from .aggregation import aggregate, cluster, filter_response, majority_vote, weighted_majority_vote  # noqa: E402
from .estimation import EstimationSettings, estimate_codes, estimate_reliability  # noqa: E402
from .kernels import BACKEND  # noqa: E402
from .selection import aggregate_kappa, kappa_rrss, kappa_rss  # noqa: E402
from .types import IDK, Answer, ResponseMatrix, WeightVector  # noqa: E402

__all__ = [
    "BACKEND",
    "IDK",
    "Answer",
    "EstimationSettings",
    "ResponseMatrix",
    "WeightVector",
    "aggregate",
    "aggregate_kappa",
    "cluster",
    "estimate_codes",
    "estimate_reliability",
    "filter_response",
    "kappa_rrss",
    "kappa_rss",
    "majority_vote",
    "weighted_majority_vote",
]
