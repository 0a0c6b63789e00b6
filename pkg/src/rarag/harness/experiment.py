"""Experiment runner: trials over simulated worlds, one report per run.

Each ``(n_sources, trial)`` pair gets its own world seeded from the run seed,
so trials are independent and can run in any order or in parallel. All
methods in a trial see the same world (common random numbers), which makes
method comparisons paired.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .. import __version__, kernels
from ..errors import DegenerateVariance, InvariantViolation, RaragError
from ..estimation import estimate_codes
from ..selection import probe_order
from ..simulation import SourceWorld
from .config import ExperimentConfig, config_items, validate
from .metrics import correlation

_TRIAL_STREAM = 0x5452  # hash stream for per-trial seeds

SELECTING = {"RA_RAG": True, "RA_RAG_NO_FILTER": True, "KAPPA_RSS": False}


def sig6(x: float) -> float:
    """Round to 6 significant digits, the precision of every reported float."""
    return float(f"{x:.6g}")


def mean_std(values) -> tuple[float, float]:
    """Mean and sample standard deviation (0 for a single trial), both rounded."""
    vals = [float(v) for v in values]
    m = math.fsum(vals) / len(vals)
    if len(vals) < 2:
        return sig6(m), 0.0
    var = math.fsum((v - m) ** 2 for v in vals) / (len(vals) - 1)
    return sig6(m), sig6(math.sqrt(var))


def trial_seed(run_seed: int, n_sources: int, trial: int) -> int:
    return kernels.hash64(run_seed, n_sources, trial, _TRIAL_STREAM)


@dataclass(frozen=True)
class MethodResult:
    method: str
    n_sources: int
    accuracy: tuple
    calls_per_query: tuple
    tokens_per_query: tuple
    cost_per_query: tuple
    accuracy_mean: float
    accuracy_std: float
    calls_mean: float
    tokens_mean: float
    cost_mean: float

    @classmethod
    def build(cls, method, n_sources, accuracy, calls, tokens_per_call, price_per_token) -> MethodResult:
        acc = tuple(sig6(a) for a in accuracy)
        calls = tuple(sig6(c) for c in calls)
        tokens = tuple(sig6(c * tokens_per_call) for c in calls)
        cost = tuple(sig6(t * price_per_token) for t in tokens)
        am, asd = mean_std(acc)
        return cls(
            method, n_sources, acc, calls, tokens, cost,
            am, asd, mean_std(calls)[0], mean_std(tokens)[0], mean_std(cost)[0],
        )


@dataclass(frozen=True)
class ReliabilityRecord:
    n_sources: int
    trial: int
    estimator: str  # "filtered" or "unfiltered"
    p_true: tuple
    w_hat: tuple
    v: tuple
    pcc: float | None
    srcc: float | None
    iterations: int
    converged: bool


@dataclass(frozen=True)
class RunReport:
    tool: str
    version: str
    seed: int
    config: dict
    results: tuple
    reliability: tuple
    probe_logs: tuple = field(default=())

    def result(self, method: str, n_sources: int | None = None) -> MethodResult:
        for r in self.results:
            if r.method == method and (n_sources is None or r.n_sources == n_sources):
                return r
        raise KeyError((method, n_sources))

    def check_consistency(self) -> None:
        """Every aggregate must be recomputable from the per-trial values."""
        for r in self.results:
            checks = [
                ((r.accuracy_mean, r.accuracy_std), mean_std(r.accuracy)),
                (r.calls_mean, mean_std(r.calls_per_query)[0]),
                (r.tokens_mean, mean_std(r.tokens_per_query)[0]),
                (r.cost_mean, mean_std(r.cost_per_query)[0]),
            ]
            for stored, recomputed in checks:
                if stored != recomputed:
                    raise InvariantViolation(f"{r.method} N={r.n_sources}: {stored} != {recomputed}")


# ---------------------------------------------------------------- trials


@dataclass
class TrialOutcome:
    n_sources: int
    trial: int
    accuracy: dict
    calls: dict
    reliability: list
    probe_logs: list


def _reliability_record(n, trial, estimator, p, weights, trace) -> ReliabilityRecord:
    try:
        pcc, srcc = correlation(weights.w_hat, p)
        pcc, srcc = sig6(pcc), sig6(srcc)
    except (DegenerateVariance, RaragError):
        pcc = srcc = None
    return ReliabilityRecord(
        n, trial, estimator,
        tuple(sig6(x) for x in p),
        tuple(sig6(x) for x in weights.w_hat),
        tuple(sig6(x) for x in weights.v),
        pcc, srcc, trace.iterations_run, trace.converged,
    )


def _probe_log_rows(world, method, n, trial, test_ids, codes, order, probes, relevance):
    out = []
    for r, j in enumerate(test_ids.tolist()):
        entries = []
        for sid in order[: int(probes[r])]:
            c = int(codes[r, sid])
            cid = None if c < 0 else world.answer(j, c).canonical_id
            entries.append([sid, cid, (c >= 0) if relevance else True])
        out.append({"n_sources": n, "trial": trial, "method": method, "query_id": j, "probes": entries})
    return out


def run_trial(config: ExperimentConfig, n: int, trial: int) -> TrialOutcome:
    """Build one world and evaluate every configured method on it."""
    cfg = config
    world = SourceWorld.from_spec(cfg.world_spec(n, trial_seed(cfg.seed, n, trial)))
    draws = world.draw(np.arange(cfg.n_queries))
    filtered = np.where(draws.score < cfg.tau, -1, draws.raw_code)
    unfiltered = draws.raw_code
    est, test = slice(0, cfg.m_est), slice(cfg.m_est, cfg.n_queries)
    test_ids = np.arange(cfg.m_est, cfg.n_queries)
    p = world.p
    settings = cfg.estimation_settings()

    acc, calls, rel, logs = {}, {}, [], []
    estimates = {}

    def estimated(name, codes):
        if name not in estimates:
            weights, trace = estimate_codes(codes[est], settings)
            estimates[name] = weights
            rel.append(_reliability_record(n, trial, name, p, weights, trace))
        return np.asarray(estimates[name].v)

    for method in cfg.methods:
        if method == "MV":
            win, _ = kernels.vote_rows(filtered[test], np.ones(n))
            probes = np.full(len(test_ids), n)
        elif method == "ORACLE_WMV":
            win, _ = kernels.vote_rows(filtered[test], p)
            probes = np.full(len(test_ids), n)
        elif method == "RA_RAG_FULL":
            win, _ = kernels.vote_rows(filtered[test], estimated("filtered", filtered))
            probes = np.full(len(test_ids), n)
        else:
            relevance = SELECTING[method]
            codes = unfiltered if method == "RA_RAG_NO_FILTER" else filtered
            v = estimated("unfiltered" if method == "RA_RAG_NO_FILTER" else "filtered", codes)
            order = probe_order(v)
            win, _, probes, _ = kernels.select_rows(codes[test], np.asarray(order), v, cfg.kappa, relevance)
            if cfg.record_probes:
                logs += _probe_log_rows(world, method, n, trial, test_ids, codes[test], order, probes, relevance)
        acc[method] = float(np.mean(win == 0))
        calls[method] = float(np.mean(probes))
    return TrialOutcome(n, trial, acc, calls, rel, logs)


def _run_task(args):
    config, n, trial = args
    return run_trial(config, n, trial)


def run_experiment(config: ExperimentConfig, progress=None) -> RunReport:
    """Run every ``(n_sources, trial)`` combination and assemble the report.

    Trials may run in worker processes; results are always reduced in
    ``(n_sources, trial)`` order so the report bytes do not depend on
    scheduling. Any failing trial aborts the whole run.
    """
    cfg = validate(config)
    tasks = [(cfg, n, t) for n in cfg.n_sources for t in range(cfg.n_trials)]
    if cfg.workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            outcomes = list(pool.map(_run_task, tasks))
    else:
        outcomes = []
        for task in tasks:
            outcomes.append(_run_task(task))
            if progress:
                progress(task[1], task[2])

    results, reliability, logs = [], [], []
    for n in cfg.n_sources:
        group = [o for o in outcomes if o.n_sources == n]
        for method in cfg.methods:
            results.append(
                MethodResult.build(
                    method, n,
                    [o.accuracy[method] for o in group],
                    [o.calls[method] for o in group],
                    cfg.tokens_per_call, cfg.price_per_token,
                )
            )
        for o in group:
            reliability.extend(o.reliability)
            logs.extend(o.probe_logs)
    report = RunReport(
        "rarag", __version__, cfg.seed, config_items(cfg), tuple(results), tuple(reliability), tuple(logs)
    )
    report.check_consistency()
    return report


run_sweep = run_experiment
