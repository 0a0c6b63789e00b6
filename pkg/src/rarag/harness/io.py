"""Flat-file formats: response-matrix CSV, weights JSON, run reports."""
from __future__ import annotations

import csv
import io
import json
from pathlib import Path

import numpy as np

from ..errors import ConfigError
from ..types import IDK, Answer, AnswerKind, ResponseMatrix, WeightVector
from .experiment import MethodResult, ReliabilityRecord, RunReport

MATRIX_HEADER = ["query_id", "source_id", "answer_kind", "canonical_id", "surface", "alignment_score"]
SWEEP_HEADER = [
    "method", "n_sources", "trial", "accuracy", "calls_per_query", "tokens_per_query", "cost_per_query",
]


def fmt6(x: float) -> str:
    return f"{x:.6g}"


def _qid(text: str):
    try:
        return int(text)
    except ValueError:
        return text


# ---------------------------------------------------------------- matrices


def matrix_to_csv(matrix: ResponseMatrix, scores=None) -> str:
    """One line per cell, query-major. ``scores`` is an ``(M, N)`` array.

    Without scores, text cells get 1 and IDK cells 0.
    """
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(MATRIX_HEADER)
    for j, (qid, row) in enumerate(zip(matrix.query_ids, matrix.cells)):
        for i, cell in enumerate(row):
            s = (0.0 if cell.is_idk else 1.0) if scores is None else float(scores[j][i])
            if cell.is_idk:
                w.writerow([qid, i, "IDK", "", "", fmt6(s)])
            else:
                w.writerow([qid, i, "TEXT", cell.canonical_id, cell.surface, fmt6(s)])
    return buf.getvalue()


def matrix_from_csv(text: str) -> tuple[ResponseMatrix, np.ndarray]:
    """Parse the matrix CSV; rows may come in any order but the grid must be full."""
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header != MATRIX_HEADER:
        raise ConfigError(f"matrix CSV header must be {','.join(MATRIX_HEADER)}", "BAD_MATRIX_CSV")
    cells: dict = {}
    order: list = []
    n_sources = 0
    for lineno, rec in enumerate(reader, start=2):
        if not rec:
            continue
        if len(rec) != 6:
            raise ConfigError(f"line {lineno}: expected 6 fields", "BAD_MATRIX_CSV")
        qid, sid, kind, cid, surface, score = rec
        try:
            sid = int(sid)
            score = float(score)
            kind = AnswerKind(kind)
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: {exc}", "BAD_MATRIX_CSV") from None
        if sid < 0:
            raise ConfigError(f"line {lineno}: negative source_id", "BAD_MATRIX_CSV")
        if not 0.0 <= score <= 1.0:
            raise ConfigError(f"line {lineno}: alignment_score {score} outside [0, 1]", "BAD_MATRIX_CSV")
        if kind is AnswerKind.IDK:
            if cid or surface:
                raise ConfigError(f"line {lineno}: IDK rows leave canonical_id and surface empty", "BAD_MATRIX_CSV")
            ans = IDK
        else:
            ans = Answer(AnswerKind.TEXT, cid, surface)
        qid = _qid(qid)
        if qid not in cells:
            cells[qid] = {}
            order.append(qid)
        if sid in cells[qid]:
            raise ConfigError(f"line {lineno}: duplicate cell ({qid}, {sid})", "BAD_MATRIX_CSV")
        cells[qid][sid] = (ans, score)
        n_sources = max(n_sources, sid + 1)
    rows, scores = [], []
    for qid in order:
        row = cells[qid]
        if len(row) != n_sources:
            raise ConfigError(f"query {qid} has {len(row)} of {n_sources} cells", "BAD_MATRIX_CSV")
        rows.append([row[i][0] for i in range(n_sources)])
        scores.append([row[i][1] for i in range(n_sources)])
    return ResponseMatrix(n_sources, order, rows), np.array(scores, dtype=np.float64).reshape(len(order), n_sources)


def write_matrix_csv(path, matrix: ResponseMatrix, scores=None) -> None:
    Path(path).write_text(matrix_to_csv(matrix, scores), encoding="utf-8")


def read_matrix_csv(path) -> tuple[ResponseMatrix, np.ndarray]:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read matrix {path}: {exc}", "CONFIG_IO") from None
    return matrix_from_csv(text)


# ---------------------------------------------------------------- weights


def weights_to_json(weights: WeightVector) -> str:
    # Full precision: weights feed back into inference.
    return json.dumps({"scale": weights.scale, "w_hat": list(weights.w_hat), "v": list(weights.v)}, indent=2) + "\n"


def weights_from_json(text: str) -> WeightVector:
    try:
        obj = json.loads(text)
        return WeightVector.from_w_hat(obj["w_hat"], obj["scale"])
    except (ValueError, KeyError, TypeError) as exc:
        raise ConfigError(f"bad weights JSON: {exc}", "BAD_WEIGHTS") from None


def weights_to_csv(weights: WeightVector) -> str:
    lines = ["source_id,w_hat,v"]
    lines += [f"{i},{w!r},{v!r}" for i, (w, v) in enumerate(zip(weights.w_hat, weights.v))]
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------- reports


def report_to_dict(report: RunReport) -> dict:
    return {
        "tool": report.tool,
        "version": report.version,
        "seed": report.seed,
        "config": report.config,
        "results": [
            {
                "method": r.method,
                "n_sources": r.n_sources,
                "accuracy": list(r.accuracy),
                "calls_per_query": list(r.calls_per_query),
                "tokens_per_query": list(r.tokens_per_query),
                "cost_per_query": list(r.cost_per_query),
                "accuracy_mean": r.accuracy_mean,
                "accuracy_std": r.accuracy_std,
                "calls_mean": r.calls_mean,
                "tokens_mean": r.tokens_mean,
                "cost_mean": r.cost_mean,
            }
            for r in report.results
        ],
        "reliability": [
            {
                "n_sources": r.n_sources,
                "trial": r.trial,
                "estimator": r.estimator,
                "p_true": list(r.p_true),
                "w_hat": list(r.w_hat),
                "v": list(r.v),
                "pcc": r.pcc,
                "srcc": r.srcc,
                "iterations": r.iterations,
                "converged": r.converged,
            }
            for r in report.reliability
        ],
        "probe_logs": list(report.probe_logs),
    }


def report_to_json(report: RunReport) -> str:
    return json.dumps(report_to_dict(report), indent=2) + "\n"


def report_from_json(text: str) -> RunReport:
    try:
        obj = json.loads(text)
        results = tuple(
            MethodResult(
                r["method"], r["n_sources"],
                tuple(r["accuracy"]), tuple(r["calls_per_query"]),
                tuple(r["tokens_per_query"]), tuple(r["cost_per_query"]),
                r["accuracy_mean"], r["accuracy_std"], r["calls_mean"], r["tokens_mean"], r["cost_mean"],
            )
            for r in obj["results"]
        )
        reliability = tuple(
            ReliabilityRecord(
                r["n_sources"], r["trial"], r["estimator"],
                tuple(r["p_true"]), tuple(r["w_hat"]), tuple(r["v"]),
                r["pcc"], r["srcc"], r["iterations"], r["converged"],
            )
            for r in obj["reliability"]
        )
        return RunReport(
            obj["tool"], obj["version"], obj["seed"], obj["config"], results, reliability,
            tuple(obj.get("probe_logs", ())),
        )
    except (ValueError, KeyError, TypeError) as exc:
        raise ConfigError(f"bad report JSON: {exc}", "BAD_REPORT") from None


def sweep_csv(report: RunReport) -> str:
    """One row per (method, n_sources, trial)."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SWEEP_HEADER)
    for r in report.results:
        for t, vals in enumerate(zip(r.accuracy, r.calls_per_query, r.tokens_per_query, r.cost_per_query)):
            w.writerow([r.method, r.n_sources, t, *(fmt6(x) for x in vals)])
    return buf.getvalue()


def sweep_from_csv(text: str) -> list[dict]:
    rows = list(csv.DictReader(io.StringIO(text)))
    out = []
    for row in rows:
        out.append(
            {
                "method": row["method"],
                "n_sources": int(row["n_sources"]),
                "trial": int(row["trial"]),
                **{k: float(row[k]) for k in SWEEP_HEADER[3:]},
            }
        )
    return out


def markdown_summary(report: RunReport) -> str:
    lines = [
        "| method | N | accuracy (mean ± std) | calls/query | tokens/query | $/query |",
        "|---|---|---|---|---|---|",
    ]
    for r in report.results:
        lines.append(
            f"| {r.method} | {r.n_sources} | {fmt6(r.accuracy_mean)} ± {fmt6(r.accuracy_std)} "
            f"| {fmt6(r.calls_mean)} | {fmt6(r.tokens_mean)} | {fmt6(r.cost_mean)} |"
        )
    rel = [r for r in report.reliability if r.pcc is not None]
    if rel:
        lines += ["", "| N | estimator | mean PCC | mean SRCC |", "|---|---|---|---|"]
        keys = sorted({(r.n_sources, r.estimator) for r in rel})
        for n, est in keys:
            group = [r for r in rel if (r.n_sources, r.estimator) == (n, est)]
            pcc = sum(r.pcc for r in group) / len(group)
            srcc = sum(r.srcc for r in group) / len(group)
            lines.append(f"| {n} | {est} | {fmt6(pcc)} | {fmt6(srcc)} |")
    return "\n".join(lines) + "\n"
