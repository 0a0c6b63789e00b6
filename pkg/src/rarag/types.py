"""Domain vocabulary shared by every module.

All types are frozen dataclasses that validate on construction, so they can
be shared read-only across worker threads and processes.
"""
from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import ConfigError, DimensionMismatch
from .kernels import IDK_CODE

WEIGHT_TOL = 1e-12


class AnswerKind(str, Enum):
    TEXT = "TEXT"
    IDK = "IDK"


@dataclass(frozen=True)
class Answer:
    """A response value: a text answer or the distinguished IDK value.

    ``canonical_id`` names the equivalence class a text answer belongs to;
    ``surface`` is what was actually said. Paraphrases share a canonical id.
    """

    kind: AnswerKind
    canonical_id: str | None = None
    surface: str | None = None

    def __post_init__(self):
        if self.kind is AnswerKind.IDK:
            if self.canonical_id is not None or self.surface is not None:
                raise ConfigError("IDK carries no canonical_id or surface", "INVALID_ANSWER")
        elif self.kind is AnswerKind.TEXT:
            if not isinstance(self.canonical_id, str) or not isinstance(self.surface, str):
                raise ConfigError("TEXT answers need canonical_id and surface", "INVALID_ANSWER")
        else:
            raise ConfigError(f"unknown answer kind {self.kind!r}", "INVALID_ANSWER")

    @classmethod
    def text(cls, canonical_id: str, surface: str | None = None) -> Answer:
        return cls(AnswerKind.TEXT, canonical_id, canonical_id if surface is None else surface)

    @property
    def is_idk(self) -> bool:
        return self.kind is AnswerKind.IDK

    def __repr__(self) -> str:
        if self.is_idk:
            return "IDK"
        if self.surface == self.canonical_id:
            return f"Answer({self.canonical_id!r})"
        return f"Answer({self.canonical_id!r}, {self.surface!r})"


IDK = Answer(AnswerKind.IDK)


def _check_unit(name: str, value: float) -> None:
    if not (isinstance(value, (int, float)) and 0.0 <= value <= 1.0):
        raise ConfigError(f"{name}={value!r} outside [0, 1]")


@dataclass(frozen=True)
class SourceProfile:
    source_id: int
    p: float
    r: float

    def __post_init__(self):
        if not isinstance(self.source_id, (int, np.integer)) or self.source_id < 0:
            raise ConfigError(f"bad source_id {self.source_id!r}")
        _check_unit("p", self.p)
        _check_unit("r", self.r)


@dataclass(frozen=True)
class ResponseRecord:
    source_id: int
    query_id: int
    raw_answer: Answer
    alignment_score: float
    filtered_answer: Answer

    def __post_init__(self):
        _check_unit("alignment_score", self.alignment_score)
        if not self.filtered_answer.is_idk and self.filtered_answer != self.raw_answer:
            raise ConfigError("filtered answer must be IDK or the raw answer", "INVALID_RECORD")


@dataclass(frozen=True)
class ResponseMatrix:
    """M queries by N sources of filtered responses; IDK is explicit."""

    n_sources: int
    query_ids: tuple
    cells: tuple

    def __post_init__(self):
        object.__setattr__(self, "query_ids", tuple(self.query_ids))
        object.__setattr__(self, "cells", tuple(tuple(row) for row in self.cells))
        if len(self.cells) != len(self.query_ids):
            raise DimensionMismatch(f"{len(self.cells)} rows for {len(self.query_ids)} query ids")
        for j, row in enumerate(self.cells):
            if len(row) != self.n_sources:
                raise DimensionMismatch(f"row {j} has {len(row)} cells, expected {self.n_sources}")
            for cell in row:
                if not isinstance(cell, Answer):
                    raise ConfigError(f"row {j} holds a non-Answer cell {cell!r}", "INVALID_MATRIX")

    @property
    def n_queries(self) -> int:
        return len(self.query_ids)

    def encode(self) -> tuple[np.ndarray, list[list[str]]]:
        """Integer codes per cell under canonical-id equality.

        Returns the ``(M, N)`` code array and, per row, the canonical ids in
        code order (code ``k`` of row ``j`` is ``vocab[j][k]``).
        """
        codes = np.full((self.n_queries, self.n_sources), IDK_CODE, dtype=np.int64)
        vocab: list[list[str]] = []
        for j, row in enumerate(self.cells):
            ids: dict[str, int] = {}
            for i, cell in enumerate(row):
                if not cell.is_idk:
                    codes[j, i] = ids.setdefault(cell.canonical_id, len(ids))
            vocab.append(list(ids))
        return codes, vocab


@dataclass(frozen=True)
class WeightVector:
    """Estimated accuracies ``w_hat`` and voting weights ``v = scale*w_hat - 1``."""

    w_hat: tuple
    v: tuple
    scale: float

    def __post_init__(self):
        object.__setattr__(self, "w_hat", tuple(float(x) for x in self.w_hat))
        object.__setattr__(self, "v", tuple(float(x) for x in self.v))
        if not (math.isfinite(self.scale) and self.scale > 0):
            raise ConfigError(f"scale must be positive, got {self.scale!r}")
        if len(self.w_hat) != len(self.v):
            raise DimensionMismatch("w_hat and v lengths differ")
        for w, v in zip(self.w_hat, self.v):
            _check_unit("w_hat", w)
            if abs(v - (self.scale * w - 1.0)) > WEIGHT_TOL:
                raise ConfigError(f"v={v!r} inconsistent with scale*w_hat-1", "INVALID_WEIGHTS")

    @classmethod
    def from_w_hat(cls, w_hat: Sequence[float], scale: float | None = None) -> WeightVector:
        w = [float(x) for x in w_hat]
        s = float(len(w) if scale is None else scale)
        return cls(tuple(w), tuple(s * x - 1.0 for x in w), s)

    @classmethod
    def uniform(cls, n: int, scale: float | None = None) -> WeightVector:
        """Weights with every ``v_i == 1`` (the Step-0 initialisation)."""
        s = float(n if scale is None else scale)
        return cls.from_w_hat([2.0 / s] * n, s)

    def __len__(self) -> int:
        return len(self.v)


@dataclass(frozen=True)
class ClusterSet:
    """Ordered clusters of ``(source_id, Answer)`` pairs; never holds IDK."""

    clusters: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "clusters", tuple(tuple(c) for c in self.clusters))
        for c in self.clusters:
            if not c:
                raise ConfigError("empty cluster", "INVALID_CLUSTERS")
            for sid, ans in c:
                if ans.is_idk:
                    raise ConfigError("IDK inside a cluster", "INVALID_CLUSTERS")

    def __len__(self) -> int:
        return len(self.clusters)

    def __iter__(self):
        return iter(self.clusters)

    def source_ids(self) -> list[list[int]]:
        return [[sid for sid, _ in c] for c in self.clusters]


class PriorKind(str, Enum):
    BETA = "beta"
    ADVERSARY_HAMMER = "adversary_hammer"
    EXPLICIT = "explicit"


ADVERSARY_P = 0.1
HAMMER_P = 0.9


@dataclass(frozen=True)
class PriorSpec:
    """Family the per-source reliabilities are drawn from.

    ``adversary_coverage`` (adversary-hammer only) gives adversaries a
    different coverage from the hammers; ``None`` means ``coverage_r``.
    """

    kind: PriorKind
    coverage_r: float = 0.6
    w_bar: float | None = None
    n_adversaries: int | None = None
    n_total: int | None = None
    adversary_coverage: float | None = None
    profiles: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "kind", PriorKind(self.kind))
        _check_unit("coverage_r", self.coverage_r)
        if self.kind is PriorKind.BETA:
            if self.w_bar is None or not (0.0 < self.w_bar < 1.0):
                raise ConfigError(f"beta prior needs 0 < w_bar < 1, got {self.w_bar!r}")
        elif self.kind is PriorKind.ADVERSARY_HAMMER:
            if self.n_adversaries is None or self.n_total is None:
                raise ConfigError("adversary-hammer prior needs n_adversaries and n_total")
            if not (0 <= self.n_adversaries <= self.n_total):
                raise ConfigError(
                    f"n_adversaries={self.n_adversaries} not in [0, n_total={self.n_total}]",
                    "REJECT_ADVERSARIES",
                )
            if self.adversary_coverage is not None:
                _check_unit("adversary_coverage", self.adversary_coverage)
        else:
            object.__setattr__(self, "profiles", tuple(self.profiles))
            if not self.profiles:
                raise ConfigError("explicit prior needs profiles")
            for k, prof in enumerate(self.profiles):
                if prof.source_id != k:
                    raise ConfigError("explicit profiles must be ordered by source_id from 0")

    @classmethod
    def beta(cls, w_bar: float = 0.6, coverage_r: float = 0.6) -> PriorSpec:
        return cls(PriorKind.BETA, coverage_r=coverage_r, w_bar=w_bar)

    @classmethod
    def adversary_hammer(
        cls, n_adversaries: int, n_total: int, coverage_r: float = 0.6, adversary_coverage: float | None = None
    ) -> PriorSpec:
        return cls(
            PriorKind.ADVERSARY_HAMMER,
            coverage_r=coverage_r,
            n_adversaries=n_adversaries,
            n_total=n_total,
            adversary_coverage=adversary_coverage,
        )

    @classmethod
    def explicit(cls, profiles: Sequence[SourceProfile]) -> PriorSpec:
        profiles = tuple(profiles)
        cov = profiles[0].r if profiles else 0.0
        return cls(PriorKind.EXPLICIT, coverage_r=cov, profiles=profiles)

    def beta_params(self) -> tuple[float, float]:
        return 2.0 * self.w_bar / (1.0 - self.w_bar), 2.0


class DocumentType(str, Enum):
    FACTUAL = "FACTUAL"
    MISINFO = "MISINFO"
    IRRELEVANT = "IRRELEVANT"


class AnswerType(str, Enum):
    CORRECT = "CORRECT"
    INCORRECT = "INCORRECT"
    IDK = "IDK"
    HALLUCINATION = "HALLUCINATION"


DOC_TYPES = tuple(DocumentType)
ANSWER_TYPES = tuple(AnswerType)
_IDK_INDEX = ANSWER_TYPES.index(AnswerType.IDK)


@dataclass(frozen=True)
class NoiseModel:
    """Answer-type distributions per retrieved-document type.

    ``raw[d][a]`` is the chance a document of type ``d`` yields answer type
    ``a``; ``filtered[d][a]`` is the same after alignment filtering at
    ``tau``. Indices follow ``DOC_TYPES`` and ``ANSWER_TYPES``. Filtering can
    only turn answers into IDK, so ``filtered <= raw`` for every non-IDK type.
    """

    raw: tuple
    filtered: tuple
    tau: float = 0.1
    n_distractors: int = 9
    name: str = "custom"

    def __post_init__(self):
        raw = tuple(tuple(float(x) for x in row) for row in self.raw)
        filt = tuple(tuple(float(x) for x in row) for row in self.filtered)
        object.__setattr__(self, "raw", raw)
        object.__setattr__(self, "filtered", filt)
        if len(raw) != 3 or len(filt) != 3 or any(len(r) != 4 for r in raw + filt):
            raise DimensionMismatch("noise tables must be 3 document types x 4 answer types")
        for label, table in (("raw", raw), ("filtered", filt)):
            for d, row in zip(DOC_TYPES, table):
                if any(x < 0 for x in row) or abs(sum(row) - 1.0) > 1e-9:
                    raise ConfigError(f"{label} distribution for {d.value} must sum to 1", "INVALID_NOISE")
        fact = DOC_TYPES.index(DocumentType.FACTUAL)
        if raw[fact][ANSWER_TYPES.index(AnswerType.INCORRECT)] != 0.0:
            raise ConfigError("factual documents cannot yield the designated wrong answer", "INVALID_NOISE")
        for d in range(3):
            for a in range(4):
                if a != _IDK_INDEX and filt[d][a] > raw[d][a] + 1e-12:
                    raise ConfigError("filtering cannot create non-IDK answers", "INVALID_NOISE")
        _check_unit("tau", self.tau)
        if self.n_distractors < 1:
            raise ConfigError("n_distractors must be >= 1")

    @classmethod
    def exact(cls, n_distractors: int = 9) -> NoiseModel:
        """No generation noise: factual -> gold, misinformation -> distractor, irrelevant -> IDK."""
        table = ((1.0, 0.0, 0.0, 0.0), (0.0, 1.0, 0.0, 0.0), (0.0, 0.0, 1.0, 0.0))
        return cls(table, table, tau=0.0, n_distractors=n_distractors, name="exact")

    @property
    def is_exact(self) -> bool:
        return self.name == "exact"

    def keep_prob(self, doc: int, ans: int) -> float:
        """Chance a raw answer of this type survives the filter."""
        if ans == _IDK_INDEX:
            return 0.0
        r = self.raw[doc][ans]
        if r == 0.0:
            return 1.0
        return min(1.0, self.filtered[doc][ans] / r)


# Defaults reproduce the per-call token and dollar figures of a 1000-source,
# no-selection run: 627115 tokens and $0.096 per query over 1000 calls.
DEFAULT_TOKENS_PER_CALL = 627115 / 1000
DEFAULT_PRICE_PER_TOKEN = 0.096 / 627115


@dataclass(frozen=True)
class CostModel:
    tokens_per_call: float = DEFAULT_TOKENS_PER_CALL
    price_per_token: float = DEFAULT_PRICE_PER_TOKEN

    def __post_init__(self):
        if not (self.tokens_per_call >= 0 and self.price_per_token >= 0):
            raise ConfigError("cost model values must be nonnegative")


@dataclass(frozen=True)
class ProbeEntry:
    source_id: int
    answer: Answer
    was_selected: bool


@dataclass(frozen=True)
class ProbeLog:
    """Sources probed for one query, in probe order."""

    entries: tuple = field(default=())

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple(self.entries))

    @property
    def probes_made(self) -> int:
        return len(self.entries)

    @property
    def n_selected(self) -> int:
        return sum(e.was_selected for e in self.entries)
