"""Command-line interface.

Exit codes: 0 success, 2 configuration or input error, 3 provider failure,
4 internal invariant violation.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import shlex
import sys
from pathlib import Path

import numpy as np

from .. import __version__
from ..aggregation import filter_response
from ..errors import (
    ConfigError,
    DegenerateMatrix,
    DimensionMismatch,
    InvariantViolation,
    LengthMismatch,
    ProviderFailure,
)
from ..estimation import EstimationSettings, estimate_reliability
from ..selection import aggregate_kappa, kappa_rrss, kappa_rss
from ..simulation import SimulatedProvider, SourceWorld, build_matrix, query_text
from ..types import ResponseMatrix
from . import io as rio
from .config import ExperimentConfig, load_config, validate
from .experiment import run_experiment, trial_seed
from .metrics import cost_report
from .provider import HttpProvider, JsonLinesProvider, make_http_server, serve_stdio

EXIT_OK, EXIT_CONFIG, EXIT_PROVIDER, EXIT_INVARIANT = 0, 2, 3, 4


def _config(args) -> ExperimentConfig:
    cfg = load_config(args.config) if getattr(args, "config", None) else ExperimentConfig()
    if getattr(args, "seed", None) is not None:
        cfg = dataclasses.replace(cfg, seed=args.seed)
    if getattr(args, "workers", None) is not None:
        cfg = dataclasses.replace(cfg, workers=args.workers)
    return validate(cfg)


def _out_dir(args) -> Path | None:
    if args.out is None:
        return None
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _emit(out: Path | None, name: str, text: str) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        (out / name).write_text(text, encoding="utf-8")


def _world(cfg: ExperimentConfig, n: int | None):
    n = cfg.n_sources[0] if n is None else n
    return cfg.world_spec(n, trial_seed(cfg.seed, n, 0))


def cmd_gen(args) -> int:
    cfg = _config(args)
    built = build_matrix(_world(cfg, args.n_sources))
    out = _out_dir(args)
    if args.format == "json":
        doc = {
            "n_sources": built.world.n_sources,
            "tau": cfg.tau,
            "profiles": [{"source_id": s.source_id, "p": s.p, "r": s.r} for s in built.world.profiles],
            "gold": list(built.gold),
            "raw_csv": rio.matrix_to_csv(built.raw, built.scores),
        }
        _emit(out, "world.json", json.dumps(doc, indent=2) + "\n")
        return EXIT_OK
    _emit(out, "raw.csv", rio.matrix_to_csv(built.raw, built.scores))
    if out is not None:
        (out / "filtered.csv").write_text(rio.matrix_to_csv(built.filtered, built.scores), encoding="utf-8")
        profiles = "source_id,p,r\n" + "".join(f"{s.source_id},{s.p!r},{s.r!r}\n" for s in built.world.profiles)
        (out / "profiles.csv").write_text(profiles, encoding="utf-8")
        (out / "gold.csv").write_text(
            "query_id,canonical_id\n" + "".join(f"{j},{g}\n" for j, g in enumerate(built.gold)), encoding="utf-8"
        )
    return EXIT_OK


def _filtered(matrix: ResponseMatrix, scores: np.ndarray, tau: float) -> ResponseMatrix:
    cells = [
        [filter_response(a, float(s), tau) for a, s in zip(row, srow)] for row, srow in zip(matrix.cells, scores)
    ]
    return ResponseMatrix(matrix.n_sources, matrix.query_ids, cells)


def cmd_estimate(args) -> int:
    cfg = _config(args)
    matrix, scores = rio.read_matrix_csv(args.matrix)
    settings = EstimationSettings(cfg.eta_max, cfg.eps_conv, cfg.scale)
    weights, trace = estimate_reliability(_filtered(matrix, scores, cfg.tau), settings)
    out = _out_dir(args)
    if args.format == "csv":
        _emit(out, "weights.csv", rio.weights_to_csv(weights))
    else:
        _emit(out, "weights.json", rio.weights_to_json(weights))
    print(f"iterations={trace.iterations_run} converged={str(trace.converged).lower()}", file=sys.stderr)
    return EXIT_OK


def _provider(args, cfg: ExperimentConfig, n: int):
    texts = {args.query_id: args.query_text} if args.query_text is not None else {}

    def text(q):
        return texts.get(q, query_text(q))

    if args.provider_cmd:
        return JsonLinesProvider(shlex.split(args.provider_cmd), n, text, timeout=args.timeout)
    if args.provider_url:
        return HttpProvider(args.provider_url, n, text, timeout=args.timeout)
    spec = _world(cfg, n)
    return SimulatedProvider(SourceWorld.from_spec(spec))


def cmd_infer(args) -> int:
    cfg = _config(args)
    try:
        weights = rio.weights_from_json(Path(args.weights).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read weights {args.weights}: {exc}", "CONFIG_IO") from None
    kappa = args.kappa if args.kappa is not None else cfg.kappa
    provider = _provider(args, cfg, len(weights))
    try:
        select = kappa_rrss if args.selection == "rrss" else kappa_rss
        responses, log = select(args.query_id, weights, kappa, provider, cfg.tau)
    finally:
        close = getattr(provider, "close", None)
        if close:
            close()
    answer = aggregate_kappa(responses, weights)
    cost = cost_report([log], cfg.cost_model())
    doc = {
        "query_id": args.query_id,
        "answer": None if answer.is_idk else answer.surface,
        "canonical_id": None if answer.is_idk else answer.canonical_id,
        "probes_made": log.probes_made,
        "probes": [
            [e.source_id, None if e.answer.is_idk else e.answer.canonical_id, e.was_selected] for e in log.entries
        ],
        "tokens": float(rio.fmt6(cost.tokens_per_query)),
        "cost": float(rio.fmt6(cost.dollars_per_query)),
    }
    _emit(_out_dir(args), "infer.json", json.dumps(doc, indent=2) + "\n")
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = _config(args)

    def progress(n, t):
        if args.verbose:
            print(f"N={n} trial={t} done", file=sys.stderr)

    report = run_experiment(cfg, progress)
    out = _out_dir(args) or (Path(cfg.out) if cfg.out else None)
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
    if args.format in (None, "json"):
        _emit(out, "report.json", rio.report_to_json(report))
    if args.format in (None, "csv"):
        _emit(out, "sweep.csv", rio.sweep_csv(report))
    return EXIT_OK


def cmd_report(args) -> int:
    try:
        text = Path(args.report).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read report {args.report}: {exc}", "CONFIG_IO") from None
    report = rio.report_from_json(text)
    report.check_consistency()
    out = _out_dir(args)
    if args.format == "csv":
        _emit(out, "sweep.csv", rio.sweep_csv(report))
    elif args.format == "json":
        _emit(out, "report.json", rio.report_to_json(report))
    else:
        _emit(out, "summary.md", rio.markdown_summary(report))
    return EXIT_OK


def cmd_serve(args) -> int:
    cfg = _config(args)
    world = SourceWorld.from_spec(_world(cfg, args.n_sources))
    if args.http is None:
        serve_stdio(world)
        return EXIT_OK
    server = make_http_server(world, args.host, args.http)
    print(f"serving on http://{server.server_address[0]}:{server.server_address[1]}/", file=sys.stderr, flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
    return EXIT_OK


def _u64(text: str) -> int:
    value = int(text, 0)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in 64 unsigned bits")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rarag", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, fmt_choices=("json", "csv"), fmt_default="json"):
        p.add_argument("--config", help="experiment config file")
        p.add_argument("--seed", type=_u64, help="override the config seed")
        p.add_argument("--out", help="output directory (default: stdout)")
        p.add_argument("--format", choices=fmt_choices, default=fmt_default)

    p = sub.add_parser("gen", help="materialize a simulated world as response matrices")
    common(p, fmt_default="csv")
    p.add_argument("--n-sources", type=int, help="number of sources (default: first value in config)")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("estimate", help="estimate source reliability from a matrix CSV")
    common(p)
    p.add_argument("--matrix", required=True, help="response matrix CSV")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("infer", help="answer one query through a provider")
    common(p)
    p.add_argument("--weights", required=True, help="weights JSON written by `estimate`")
    p.add_argument("--query-id", type=int, required=True)
    p.add_argument("--query-text")
    p.add_argument("--kappa", type=int)
    p.add_argument("--selection", choices=("rrss", "rss"), default="rrss")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--provider-cmd", help="command speaking JSON lines on stdin/stdout")
    g.add_argument("--provider-url", help="HTTP endpoint accepting one JSON request per POST")
    p.add_argument("--timeout", type=float, default=30.0)
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("sweep", help="run a full experiment")
    common(p, fmt_default=None)
    p.add_argument("--workers", type=int, help="parallel trial workers")
    p.add_argument("-v", "--verbose", action="store_true")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("report", help="re-render a saved run report")
    p.add_argument("report", help="report.json from `sweep`")
    p.add_argument("--out", help="output directory (default: stdout)")
    p.add_argument("--format", choices=("json", "csv", "markdown"), default="markdown")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("serve", help="serve a simulated world over the provider protocol")
    p.add_argument("--config")
    p.add_argument("--seed", type=_u64)
    p.add_argument("--n-sources", type=int)
    p.add_argument("--http", type=int, metavar="PORT", help="serve HTTP instead of stdio")
    p.add_argument("--host", default="127.0.0.1")
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        return args.func(args)
    except ProviderFailure as exc:
        print(f"rarag: provider failure: {exc}", file=sys.stderr)
        return EXIT_PROVIDER
    except InvariantViolation as exc:
        print(f"rarag: invariant violation: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except (ConfigError, DimensionMismatch, DegenerateMatrix, LengthMismatch) as exc:
        print(f"rarag: {exc.code}: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
