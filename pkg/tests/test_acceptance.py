"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run alone with ``pytest tests/test_acceptance.py -v -s`` or
``python3 tests/test_acceptance.py``. The lines are also repeated in the
pytest terminal summary.
"""
import dataclasses
import itertools
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from rarag.aggregation import cluster, majority_vote, weighted_majority_vote
from rarag.estimation import EstimationSettings, estimate_codes
from rarag.harness import io as rio
from rarag.harness.config import ExperimentConfig, dump_config, load_config, parse_config, validate
from rarag.harness.experiment import run_experiment
from rarag.harness.metrics import correlation
from rarag.selection import aggregate_kappa, kappa_rrss
from rarag.simulation import SourceWorld, WorldSpec, list_presets, load_preset
from rarag.types import ANSWER_TYPES, DOC_TYPES, IDK, Answer, PriorSpec, SourceProfile, WeightVector

ROOT = Path(__file__).resolve().parent.parent
FIXTURES = ROOT / "tests" / "fixtures"

LINES: list[str] = []


def verdict(n: int, ok: bool, detail: str) -> None:
    line = f"criterion {n:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
    LINES.append(line)
    print(line, flush=True)
    assert ok, line


# ---------------------------------------------------------------- 1. voting


def _labels_to_answers(labels):
    return [(i, IDK if x is None else Answer.text(x, f"{x}/{i}")) for i, x in enumerate(labels)]


def _brute_winner(labels, weights):
    """Explicit score table; ties go to the label that appears first."""
    order = []
    table = {}
    for x, w in zip(labels, weights):
        if x is None:
            continue
        if x not in table:
            order.append(x)
            table[x] = 0.0
        table[x] += w
    if not order:
        return None
    best = max(table.values())
    return next(x for x in order if table[x] == best)


def _winner_label(answer):
    return None if answer.is_idk else answer.canonical_id


def test_criterion_1_voting_correctness():
    rng = np.random.default_rng(1)
    failures = []
    # MV == unit-weight WMV on 10^4 random cluster sets
    for _ in range(10_000):
        n = int(rng.integers(1, 13))
        labels = [None if u < 0.3 else "abcde"[int(k)] for u, k in zip(rng.random(n), rng.integers(0, 5, n))]
        cs = cluster(_labels_to_answers(labels))
        if majority_vote(cs, n) != weighted_majority_vote(cs, [1.0] * n):
            failures.append(("mv", labels))
        # IDK never wins unless every response is IDK, whatever the weights
        w = rng.normal(0, 2, n)
        win = weighted_majority_vote(cs, w)
        if win.is_idk != all(x is None for x in labels):
            failures.append(("idk", labels))
        # positive scaling: integer weights by integer factors and reals by powers of two are exact
        wi = rng.integers(-5, 10, n).astype(float)
        for wa, c in ((wi, float(rng.integers(1, 50))), (w, 2.0 ** int(rng.integers(-20, 20)))):
            if weighted_majority_vote(cs, wa) != weighted_majority_vote(cs, wa * c):
                failures.append(("scale", labels))
    # exhaustive: every input with <= 6 sources and <= 4 distinct answers
    weight_sets = [
        lambda n: [1.0] * n,
        lambda n: [float(i + 1) for i in range(n)],
        lambda n: [2.0, -1.0, 1.0, 1.0, 3.0, 0.5][:n],
        lambda n: list(np.random.default_rng(n).normal(1, 1, n)),
    ]
    checked = 0
    for n in range(1, 7):
        for labels in itertools.product([None, "a", "b", "c", "d"], repeat=n):
            cs = cluster(_labels_to_answers(labels))
            for make in weight_sets:
                w = make(n)
                checked += 1
                if _winner_label(weighted_majority_vote(cs, w)) != _brute_winner(labels, w):
                    failures.append(("brute", labels, tuple(w)))
    verdict(1, not failures, f"10^4 random sets + {checked} exhaustive cases, {len(failures)} mismatches")


# ---------------------------------------------------------------- 2. qualitative example


def test_criterion_2_elected_example():
    outputs = ["judges", None, "president", "senators", None, "president", "president", "senators"]
    w_hat = [0.83, 0.64, 0.43, 0.89, 0.6, 0.66, 0.51, 0.8]
    responses = _labels_to_answers(outputs)
    cs = cluster(responses)
    mv = _winner_label(majority_vote(cs, 8))
    v = WeightVector.from_w_hat(w_hat)
    full = _winner_label(weighted_majority_vote(cs, v))

    class Table:
        n_sources = 8

        def probe(self, query_id, source_id):
            from rarag.selection import ProviderReply

            ans = responses[source_id][1]
            return ProviderReply(ans, 0.0 if ans.is_idk else 1.0)

    selected, _ = kappa_rrss(0, v, 4, Table(), 0.1)
    rrss = _winner_label(aggregate_kappa(selected, v))
    ok = mv == "president" and full == "senators" and rrss == "senators"
    verdict(2, ok, f"MV -> {mv}, weighted vote -> {full}, kappa=4 selection -> {rrss}")


# ---------------------------------------------------------------- 3. estimator recovery


def test_criterion_3_estimator_recovery():
    t0 = time.perf_counter()
    errs, pccs = [], []
    for seed in range(10):
        world = SourceWorld.from_spec(WorldSpec(200, 8, PriorSpec.beta(0.6, 0.6), seed=seed))
        weights, _ = estimate_codes(world.codes(np.arange(200)), EstimationSettings())
        p = np.asarray(world.p)
        errs.append(float(np.mean(np.abs(np.asarray(weights.w_hat) - p))))
        pccs.append(correlation(weights.w_hat, p)[0])
    elapsed = time.perf_counter() - t0
    mae, pcc = float(np.mean(errs)), float(np.mean(pccs))
    ok = mae <= 0.05 and pcc >= 0.95 and elapsed < 10
    verdict(3, ok, f"mean |w_hat - p| = {mae:.4f} (<= 0.05), mean PCC = {pcc:.4f} (>= 0.95), {elapsed:.2f}s")


# ---------------------------------------------------------------- 4. beta-prior sweep


def test_criterion_4_beta_sweep():
    t0 = time.perf_counter()
    cfg = validate(ExperimentConfig(n_sources=(4, 5, 6, 7, 8, 9), methods=("RA_RAG", "MV", "ORACLE_WMV")))
    report = run_experiment(cfg)
    elapsed = time.perf_counter() - t0
    parts, ok = [], elapsed < 60
    for n in cfg.n_sources:
        ra, mv, orc = (report.result(m, n).accuracy_mean for m in ("RA_RAG", "MV", "ORACLE_WMV"))
        good = ra >= mv and abs(ra - orc) <= 0.01
        ok &= good
        parts.append(f"N={n}: {ra:.3f}/{mv:.3f}/{orc:.3f}{'' if good else '*'}")
    verdict(4, ok, f"RA-RAG/MV/Oracle {'; '.join(parts)} ({elapsed:.1f}s)")


# ---------------------------------------------------------------- 5. adversary hammer


def test_criterion_5_adversary_hammer():
    mv, gaps = [], []
    for k in range(1, 8):
        cfg = validate(
            ExperimentConfig(prior="adversary_hammer", n_adversaries=k, n_sources=(9,),
                             methods=("RA_RAG", "MV", "ORACLE_WMV"))
        )
        report = run_experiment(cfg)
        ra, m, orc = (report.result(x, 9).accuracy_mean for x in ("RA_RAG", "MV", "ORACLE_WMV"))
        mv.append(m)
        gaps.append(abs(ra - orc))
    decreasing = all(a > b for a, b in zip(mv, mv[1:]))
    drop = mv[0] - mv[-1]
    ok = decreasing and drop >= 0.25 and max(gaps) <= 0.02
    verdict(
        5, ok,
        f"MV {' > '.join(f'{x:.3f}' for x in mv)} (drop {drop:.3f} >= 0.25); "
        f"max |RA-RAG - Oracle| = {max(gaps):.4f} (<= 0.02)",
    )


# ---------------------------------------------------------------- 6. efficiency


def test_criterion_6_efficiency():
    out = {}
    for n in (1000, 10):
        cfg = validate(
            ExperimentConfig(n_sources=(n,), methods=("RA_RAG", "RA_RAG_FULL"), n_trials=3 if n == 1000 else 10)
        )
        report = run_experiment(cfg)
        out[n] = report.result("RA_RAG", n), report.result("RA_RAG_FULL", n)
    rr, full = out[1000]
    analytic = 4 / 0.6
    rel = abs(rr.calls_mean - analytic) / analytic
    red_1000 = 1 - rr.tokens_mean / full.tokens_mean
    red_10 = 1 - out[10][0].tokens_mean / out[10][1].tokens_mean
    ok = rel <= 0.05 and red_1000 >= 0.99 and red_10 >= 0.25 and full.tokens_mean == 627115 and full.calls_mean == 1000
    verdict(
        6, ok,
        f"N=1000 calls/query {rr.calls_mean:.4g} vs {analytic:.4g} ({rel:.1%} off), reduction {red_1000:.2%}; "
        f"N=10 reduction {red_10:.2%}; w/o selection tokens {full.tokens_mean:g}",
    )


# ---------------------------------------------------------------- 7. RRSS vs RSS


def test_criterion_7_rrss_vs_rss():
    # the reference accuracies for this comparison come from GPT-4o-mini on NQ
    gaps, parts = {}, []
    for n in (10, 1000):
        cfg = validate(
            ExperimentConfig(n_sources=(n,), noise="gpt4o-mini-nq", methods=("RA_RAG", "KAPPA_RSS"),
                             n_trials=10 if n == 10 else 3)
        )
        report = run_experiment(cfg)
        rrss, rss = report.result("RA_RAG", n), report.result("KAPPA_RSS", n)
        paired = [a - b for a, b in zip(rrss.accuracy, rss.accuracy)]
        gaps[n] = (rrss.accuracy_mean - rss.accuracy_mean, min(paired))
        parts.append(f"N={n}: RRSS {rrss.accuracy_mean:.3f} vs RSS {rss.accuracy_mean:.3f}")
    ok = gaps[10][0] > 0 and gaps[1000][0] > 0 and gaps[1000][0] >= gaps[10][0]
    verdict(7, ok, f"{'; '.join(parts)}; gap {gaps[10][0]:.3f} -> {gaps[1000][0]:.3f}")


# ---------------------------------------------------------------- 8. filtering ablation


def test_criterion_8_filtering_ablation():
    cfg = validate(load_config(ROOT / "configs" / "filtering_ablation.cfg"))
    report = run_experiment(cfg)
    n = cfg.n_sources[0]
    acc_f = report.result("RA_RAG", n).accuracy_mean
    acc_u = report.result("RA_RAG_NO_FILTER", n).accuracy_mean

    def adversary_v(estimator):
        vs = [v for r in report.reliability if r.estimator == estimator for v, p in zip(r.v, r.p_true) if p == 0.1]
        return float(np.mean(vs))

    v_f, v_u = adversary_v("filtered"), adversary_v("unfiltered")
    ok = acc_f > acc_u and v_u > v_f
    verdict(
        8, ok,
        f"accuracy with filter {acc_f:.3f} vs without {acc_u:.3f}; mean adversary v with filter {v_f:.3f} "
        f"vs without {v_u:.3f}",
    )


# ---------------------------------------------------------------- 9. noise fidelity


def _types(codes, nd):
    return np.select([codes == 0, (codes >= 1) & (codes <= nd), codes < 0], [0, 1, 2], 3)


def test_criterion_9_noise_fidelity():
    # one world per (preset, document type), each with its own seed so the
    # checks use independent draws; p and r pin every cell to that type
    pins = {"FACTUAL": (1.0, 1.0), "MISINFO": (0.0, 1.0), "IRRELEVANT": (0.5, 0.0)}
    checks, misses = 0, []
    for k, (name, tau) in enumerate(list_presets()):
        nm = load_preset(name, tau)
        for doc, (p, r) in pins.items():
            d = DOC_TYPES.index(doc)
            prior = PriorSpec.explicit([SourceProfile(i, p, r) for i in range(100)])
            draws = SourceWorld.from_spec(WorldSpec(100, 100, prior, noise=nm, seed=3 * k + DOC_TYPES.index(doc))).draw(np.arange(100))
            raw = _types(draws.raw_code, nm.n_distractors).ravel()
            filt = _types(np.where(draws.score < tau, -1, draws.raw_code), nm.n_distractors).ravel()
            for state, table, got in (("raw", nm.raw, raw), ("filtered", nm.filtered, filt)):
                for a in range(4):
                    pi = table[d][a]
                    freq = float(np.mean(got == a))
                    checks += 1
                    if abs(freq - pi) > 3 * np.sqrt(pi * (1 - pi) / got.size) + 1e-12:
                        misses.append(f"{name}@{tau:g} {doc}/{state}/{ANSWER_TYPES[a]} {freq:.4f} vs {pi:.4f}")
    verdict(9, not misses, f"{checks} marginals over 10^4 draws each, {len(misses)} outside 3 sigma {misses[:3]}")


# ---------------------------------------------------------------- 10. determinism and round trips


def test_criterion_10_determinism_and_serialization(tmp_path):
    problems = []
    cfg = validate(ExperimentConfig(n_sources=(4, 7), noise="phi3-tqa", methods=(
        "RA_RAG", "MV", "ORACLE_WMV", "KAPPA_RSS", "RA_RAG_NO_FILTER", "RA_RAG_FULL"), n_trials=3, seed=77))
    a = rio.report_to_json(run_experiment(cfg))
    if a != rio.report_to_json(run_experiment(cfg)):
        problems.append("in-process rerun differs")
    par = rio.report_to_dict(run_experiment(dataclasses.replace(cfg, workers=3)))
    par["config"]["workers"] = 1
    if rio.report_to_json(rio.report_from_json(rio.report_to_json(rio.report_from_json(
            __import__("json").dumps(par))))) != a:
        problems.append("parallel run differs")

    cfg_path = tmp_path / "run.cfg"
    cfg_path.write_text(dump_config(dataclasses.replace(cfg, workers=1)))
    outs = []
    for k in range(2):
        out = tmp_path / f"run{k}"
        subprocess.run([sys.executable, "-m", "rarag", "sweep", "--config", str(cfg_path), "--out", str(out)],
                       check=True)
        outs.append(((out / "report.json").read_bytes(), (out / "sweep.csv").read_bytes()))
    if outs[0] != outs[1]:
        problems.append("CLI reruns differ")

    text = (FIXTURES / "matrix.csv").read_text(encoding="utf-8")
    m, s = rio.matrix_from_csv(text)
    if rio.matrix_to_csv(m, s) != text:
        problems.append("matrix.csv")
    text = (FIXTURES / "weights.json").read_text(encoding="utf-8")
    if rio.weights_to_json(rio.weights_from_json(text)) != text:
        problems.append("weights.json")
    text = (FIXTURES / "report.json").read_text(encoding="utf-8")
    report = rio.report_from_json(text)
    if rio.report_to_json(report) != text:
        problems.append("report.json")
    text = (FIXTURES / "sweep.csv").read_text(encoding="utf-8")
    rows = rio.sweep_from_csv(text)
    rebuilt = ",".join(rio.SWEEP_HEADER) + "\n" + "".join(
        f"{r['method']},{r['n_sources']},{r['trial']},"
        + ",".join(rio.fmt6(r[k]) for k in rio.SWEEP_HEADER[3:]) + "\n"
        for r in rows
    )
    if rebuilt != text or rio.sweep_csv(report) != text:
        problems.append("sweep.csv")
    for path in sorted((ROOT / "configs").glob("*.cfg")):
        c = load_config(path)
        if parse_config(dump_config(c)) != c:
            problems.append(path.name)
    verdict(10, not problems, "byte-identical reruns and lossless round trips" if not problems else str(problems))


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-s"]))
