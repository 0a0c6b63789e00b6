"""Seeded synthetic multi-source benchmark.

Every source holds a relevant document for a query with probability ``r``;
a relevant document is factual with probability ``p`` and otherwise supports
one of ``n_distractors`` committed wrong answers. An answer-type noise model
then decides what the source actually says and how well grounded it looks.

All randomness is counter-based: each draw is a hash of
``(seed, source_id, query_id, stream)``, so any cell can be regenerated
alone, in any order, by any worker, with identical results.

Integer codes (row-local, ``-1`` = IDK):

* ``0``                         gold answer
* ``1 + k``                     distractor ``k``
* ``1 + n_distractors + i``     hallucination by source ``i`` (never shared)
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from . import kernels
from .aggregation import filter_response
from .errors import ConfigError
from .selection import ProviderReply
from .types import (
    ADVERSARY_P,
    ANSWER_TYPES,
    DOC_TYPES,
    HAMMER_P,
    IDK,
    Answer,
    AnswerType,
    DocumentType,
    NoiseModel,
    PriorKind,
    PriorSpec,
    ResponseMatrix,
    ResponseRecord,
    SourceProfile,
)

DEFAULT_PRESET = "llama3-tqa"

# hash streams
_REL, _TRUTH, _DISTRACTOR, _PARA, _ATYPE, _KEEP, _SCORE, _PRIOR = range(1, 9)

_GRID = 1_000_000  # alignment scores live on a 1e-6 grid

_FACT = DOC_TYPES.index(DocumentType.FACTUAL)
_MIS = DOC_TYPES.index(DocumentType.MISINFO)
_IRR = DOC_TYPES.index(DocumentType.IRRELEVANT)
_CORRECT = ANSWER_TYPES.index(AnswerType.CORRECT)
_INCORRECT = ANSWER_TYPES.index(AnswerType.INCORRECT)
_IDK_T = ANSWER_TYPES.index(AnswerType.IDK)
_HALLU = ANSWER_TYPES.index(AnswerType.HALLUCINATION)


# ---------------------------------------------------------------- presets


def _preset_dir():
    return resources.files("rarag") / "data" / "noise"


def list_presets() -> list[tuple[str, float]]:
    """Available ``(name, tau)`` pairs, e.g. ``("llama3-tqa", 0.1)``."""
    out = []
    for entry in _preset_dir().iterdir():
        stem = entry.name
        if not stem.endswith(".tsv"):
            continue
        name, _, tau = stem[:-4].rpartition("-tau")
        out.append((name, float(tau)))
    return sorted(out)


def parse_noise_table(text: str) -> tuple[list[list[float]], list[list[float]]]:
    """Read the tab-separated preset format into raw and filtered 3x4 tables.

    Lines starting with ``#`` are comments. The first non-comment line is the
    header ``document_type  answer_type  raw_prob  filtered_prob``.
    """
    raw = [[None] * 4 for _ in range(3)]
    filt = [[None] * 4 for _ in range(3)]
    lines = [ln for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
    if not lines or lines[0].split() != ["document_type", "answer_type", "raw_prob", "filtered_prob"]:
        raise ConfigError("noise table is missing its header line", "INVALID_NOISE")
    for ln in lines[1:]:
        parts = ln.split()
        if len(parts) != 4:
            raise ConfigError(f"bad noise table line {ln!r}", "INVALID_NOISE")
        try:
            d = DOC_TYPES.index(DocumentType(parts[0]))
            a = ANSWER_TYPES.index(AnswerType(parts[1]))
            raw[d][a], filt[d][a] = float(parts[2]), float(parts[3])
        except ValueError as exc:
            raise ConfigError(f"bad noise table line {ln!r}: {exc}", "INVALID_NOISE") from None
    if any(x is None for row in raw + filt for x in row):
        raise ConfigError("noise table must list all 12 (document, answer) pairs", "INVALID_NOISE")
    return raw, filt


def _fit(row: list[float]) -> list[float]:
    """Shares summing to 1: IDK takes up any slack, overfull rows are rescaled."""
    total = sum(row)
    if total <= 0:
        raise ConfigError("noise distribution with zero mass", "INVALID_NOISE")
    answered = math.fsum(x for a, x in enumerate(row) if a != _IDK_T)
    out = list(row) if answered <= 1.0 else [x / total for x in row]
    out[_IDK_T] = 0.0
    out[_IDK_T] = max(0.0, 1.0 - math.fsum(out))
    return out


def reconcile(raw, filt) -> tuple[list[list[float]], list[list[float]]]:
    """Turn published percentage tables into a consistent noise model.

    Published rows do not always sum to 100%. When the non-IDK shares fit,
    they are kept as published and IDK absorbs the difference; otherwise the
    row is rescaled proportionally. A filter can only turn answers into IDK,
    so a non-IDK filtered share above its raw share is capped at the raw
    share, again with the excess going to IDK.
    """
    raw_n, filt_n = [], []
    for r_row, f_row in zip(raw, filt):
        r = _fit(r_row)
        f = _fit(f_row)
        for a in range(4):
            if a != _IDK_T:
                f[a] = min(f[a], r[a])
        f[_IDK_T] = 0.0
        f[_IDK_T] = 1.0 - math.fsum(f)
        raw_n.append(r)
        filt_n.append(f)
    return raw_n, filt_n


def load_preset(name: str = DEFAULT_PRESET, tau: float = 0.1) -> NoiseModel:
    """Load a shipped answer-type noise preset such as ``"llama3-tqa"`` at ``tau``."""
    key = name.lower()
    fname = f"{key}-tau{tau:g}.tsv"
    path = _preset_dir() / fname
    if not path.is_file():
        known = ", ".join(f"{n}@{t:g}" for n, t in list_presets())
        raise ConfigError(f"unknown noise preset {name!r} at tau={tau:g}; known: {known}", "UNKNOWN_PRESET")
    raw, filt = reconcile(*parse_noise_table(path.read_text(encoding="utf-8")))
    return NoiseModel(raw, filt, tau=float(tau), n_distractors=9, name=f"{key}@{tau:g}")


# ---------------------------------------------------------------- priors


def sample_prior(spec: PriorSpec, n: int, rng: np.random.Generator) -> list[SourceProfile]:
    if spec.kind is PriorKind.BETA:
        a, b = spec.beta_params()
        ps = rng.beta(a, b, size=n)
        return [SourceProfile(i, float(p), spec.coverage_r) for i, p in enumerate(ps)]
    if spec.kind is PriorKind.ADVERSARY_HAMMER:
        if n != spec.n_total:
            raise ConfigError(f"prior is for {spec.n_total} sources, asked for {n}")
        adv_r = spec.coverage_r if spec.adversary_coverage is None else spec.adversary_coverage
        roles = np.array([True] * spec.n_adversaries + [False] * (n - spec.n_adversaries))
        roles = rng.permutation(roles)
        return [
            SourceProfile(i, ADVERSARY_P if adv else HAMMER_P, adv_r if adv else spec.coverage_r)
            for i, adv in enumerate(roles.tolist())
        ]
    if len(spec.profiles) != n:
        raise ConfigError(f"explicit prior lists {len(spec.profiles)} sources, asked for {n}")
    return list(spec.profiles)


# ---------------------------------------------------------------- world


@dataclass(frozen=True)
class WorldSpec:
    n_queries: int
    n_sources: int
    prior: PriorSpec
    noise: NoiseModel | None = None  # None means exact answers
    n_paraphrases: int = 9
    seed: int = 0

    def __post_init__(self):
        if self.n_queries < 1:
            raise ConfigError(f"n_queries must be >= 1, got {self.n_queries}")
        if self.n_sources < 2:
            raise ConfigError(f"n_sources must be >= 2, got {self.n_sources}")
        if self.n_paraphrases < 1:
            raise ConfigError(f"n_paraphrases must be >= 1, got {self.n_paraphrases}")
        if not 0 <= self.seed < 2**64:
            raise ConfigError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        if self.noise is None:
            object.__setattr__(self, "noise", NoiseModel.exact())


def prior_rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(kernels.hash64(seed, 0, 0, _PRIOR))


def gold_id(query_id: int) -> str:
    return f"q{query_id}:gold"


@dataclass(frozen=True)
class CellDraws:
    """Everything the simulator decides for a block of (query, source) cells."""

    relevant: np.ndarray
    truthful: np.ndarray
    distractor: np.ndarray
    doc_type: np.ndarray
    answer_type: np.ndarray
    raw_code: np.ndarray
    score: np.ndarray
    paraphrase: np.ndarray


@dataclass(frozen=True)
class SourceWorld:
    profiles: tuple
    noise: NoiseModel
    seed: int
    n_paraphrases: int = 9
    _p: np.ndarray = field(init=False, repr=False, compare=False)
    _r: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "profiles", tuple(self.profiles))
        object.__setattr__(self, "_p", np.array([s.p for s in self.profiles], dtype=np.float64))
        object.__setattr__(self, "_r", np.array([s.r for s in self.profiles], dtype=np.float64))

    @classmethod
    def from_spec(cls, spec: WorldSpec) -> SourceWorld:
        profiles = sample_prior(spec.prior, spec.n_sources, prior_rng(spec.seed))
        return cls(tuple(profiles), spec.noise, spec.seed, spec.n_paraphrases)

    @property
    def n_sources(self) -> int:
        return len(self.profiles)

    @property
    def p(self) -> np.ndarray:
        return self._p.copy()

    def _u(self, rows, sources, stream):
        return kernels.uniform_grid(self.seed, rows, sources, stream)

    def draw(self, rows, sources=None) -> CellDraws:
        rows = np.atleast_1d(np.asarray(rows, dtype=np.int64))
        sources = np.arange(self.n_sources) if sources is None else np.atleast_1d(np.asarray(sources, dtype=np.int64))
        if sources.size and (sources.min() < 0 or sources.max() >= self.n_sources):
            raise IndexError("source id out of range")
        nm = self.noise
        nd = nm.n_distractors

        relevant = self._u(rows, sources, _REL) < self._r[sources][None, :]
        truthful = self._u(rows, sources, _TRUTH) < self._p[sources][None, :]
        distractor = np.minimum((self._u(rows, sources, _DISTRACTOR) * nd).astype(np.int64), nd - 1)
        doc = np.where(relevant, np.where(truthful, _FACT, _MIS), _IRR)

        raw_cdf = np.cumsum(np.array(nm.raw), axis=1)
        raw_cdf[:, -1] = np.inf  # guard against sums a hair under 1
        u_type = self._u(rows, sources, _ATYPE)
        atype = np.empty(doc.shape, dtype=np.int64)
        for d in range(3):
            mask = doc == d
            atype[mask] = np.searchsorted(raw_cdf[d], u_type[mask], side="right")

        raw_code = np.full(doc.shape, -1, dtype=np.int64)
        raw_code[atype == _CORRECT] = 0
        inc = atype == _INCORRECT
        raw_code[inc] = 1 + distractor[inc]
        hal = atype == _HALLU
        raw_code[hal] = np.broadcast_to(1 + nd + sources[None, :], doc.shape)[hal]

        keep_tab = np.array([[nm.keep_prob(d, a) for a in range(4)] for d in range(3)])
        k = keep_tab[doc, atype]
        kept = self._u(rows, sources, _KEEP) < k
        score = self._scores(self._u(rows, sources, _SCORE), k, kept, raw_code < 0)

        para = np.minimum(
            (self._u(rows, sources, _PARA) * self.n_paraphrases).astype(np.int64), self.n_paraphrases - 1
        )
        return CellDraws(relevant, truthful, distractor, doc, atype, raw_code, score, para)

    def _scores(self, u, k, kept, raw_idk):
        """Alignment scores that reproduce the keep decision at the model's tau.

        Kept answers land in ``[tau, 1]`` and dropped ones in ``[0, tau)``, on a
        1e-6 grid so they survive 6-significant-digit serialization. Answers the
        filter never drops score 1.0; raw IDK scores 0.0.
        """
        tau_u = math.ceil(self.noise.tau * _GRID)
        if tau_u / _GRID < self.noise.tau:
            tau_u += 1
        hi = np.minimum(tau_u + np.floor(u * (_GRID - tau_u + 1)), _GRID)
        lo = np.floor(u * tau_u)
        grid = np.where(kept, hi, lo)
        grid = np.where(k >= 1.0, _GRID, grid)
        grid = np.where(raw_idk, 0, grid)
        return grid / _GRID

    def codes(self, rows, sources=None, tau: float | None = None) -> np.ndarray:
        """Filtered integer codes for a block of cells.

        ``tau`` defaults to the noise model's threshold; ``tau=0`` keeps every
        raw answer (filtering disabled).
        """
        tau = self.noise.tau if tau is None else tau
        d = self.draw(rows, sources)
        return np.where(d.score < tau, -1, d.raw_code)

    def answer(self, query_id: int, code: int, paraphrase: int = 0) -> Answer:
        """Map a row-local code back to an :class:`Answer`."""
        nd = self.noise.n_distractors
        if code < 0:
            return IDK
        if code == 0:
            return Answer.text(gold_id(query_id), gold_surface(query_id, paraphrase))
        if code <= nd:
            k = code - 1
            return Answer.text(f"q{query_id}:d{k}", f"wrong answer {k} to question {query_id}")
        i = code - 1 - nd
        return Answer.text(f"q{query_id}:h{i}", f"unsupported claim by source {i} about question {query_id}")

    def generate_response(self, source_id: int, query_id: int, tau: float | None = None) -> ResponseRecord:
        tau = self.noise.tau if tau is None else tau
        d = self.draw([query_id], [source_id])
        raw = self.answer(query_id, int(d.raw_code[0, 0]), int(d.paraphrase[0, 0]))
        score = float(d.score[0, 0])
        return ResponseRecord(source_id, query_id, raw, score, filter_response(raw, score, tau))


def gold_surface(query_id: int, paraphrase: int = 0) -> str:
    return f"Gold answer {query_id} (phrasing {paraphrase})"


def query_text(query_id: int) -> str:
    return f"synthetic question {query_id}"


@dataclass(frozen=True)
class BuiltWorld:
    raw: ResponseMatrix
    filtered: ResponseMatrix
    gold: tuple
    world: SourceWorld
    scores: np.ndarray

    def __iter__(self):
        # allows ``raw, filtered, gold, world = build_matrix(spec)``
        return iter((self.raw, self.filtered, self.gold, self.world))


def build_matrix(spec: WorldSpec) -> BuiltWorld:
    """Materialize every cell of the world as raw and filtered matrices."""
    world = SourceWorld.from_spec(spec)
    rows = np.arange(spec.n_queries)
    d = world.draw(rows)
    filt = np.where(d.score < world.noise.tau, -1, d.raw_code)
    raw_cells, filt_cells = [], []
    for j in range(spec.n_queries):
        raw_row = [world.answer(j, int(c), int(k)) for c, k in zip(d.raw_code[j], d.paraphrase[j])]
        raw_cells.append(raw_row)
        filt_cells.append([a if f >= 0 else IDK for a, f in zip(raw_row, filt[j])])
    ids = tuple(range(spec.n_queries))
    return BuiltWorld(
        ResponseMatrix(spec.n_sources, ids, raw_cells),
        ResponseMatrix(spec.n_sources, ids, filt_cells),
        tuple(gold_id(j) for j in ids),
        world,
        d.score,
    )


class SimulatedProvider:
    """Provider backed by a :class:`SourceWorld`; replies are raw (unfiltered)."""

    def __init__(self, world: SourceWorld):
        self.world = world
        self.n_sources = world.n_sources
        self.calls = 0

    def probe(self, query_id: int, source_id: int) -> ProviderReply:
        if not 0 <= source_id < self.n_sources:
            raise IndexError(f"source {source_id} out of range")
        self.calls += 1
        rec = self.world.generate_response(source_id, query_id)
        return ProviderReply(rec.raw_answer, rec.alignment_score)
