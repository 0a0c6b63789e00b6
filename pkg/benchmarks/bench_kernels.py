"""Time the compiled kernels against the pure-Python fallback.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--rows 1600] [--sources 9,100,1000]

Each kernel runs on identical inputs under both backends; outputs are checked
for equality before timings are reported.
"""
import argparse
import importlib
import timeit

import numpy as np

from rarag import _kernels_py
from rarag.estimation import EstimationSettings, estimate_codes
from rarag.simulation import SourceWorld, WorldSpec
from rarag.types import PriorSpec


def load_compiled():
    try:
        return importlib.import_module("rarag._kernels")
    except ImportError:
        return None


def cases(world, rows, n):
    codes = world.codes(np.arange(rows))
    v = np.asarray(estimate_codes(codes[:200], EstimationSettings())[0].v)
    order = np.lexsort((np.arange(n), -v)).astype(np.int64)
    consensus, _ = _kernels_py.vote_rows(codes, v)
    return {
        "uniform_grid": lambda k: k.uniform_grid(7, np.arange(rows), np.arange(n), 3),
        "vote_rows": lambda k: k.vote_rows(codes, v),
        "reliability_counts": lambda k: k.reliability_counts(codes, consensus),
        "select_rows (rrss)": lambda k: k.select_rows(codes, order, v, 4, True),
    }


def same(a, b):
    if isinstance(a, tuple):
        return all(same(x, y) for x, y in zip(a, b))
    return np.array_equal(np.asarray(a), np.asarray(b))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--rows", type=int, default=1600)
    ap.add_argument("--sources", default="9,100,1000")
    args = ap.parse_args()

    compiled = load_compiled()
    if compiled is None:
        print("compiled extension not built; run `pip install -e . --no-build-isolation` first")
    print(f"{'kernel':<22}{'N':>6}{'python ms':>12}{'cython ms':>12}{'speedup':>9}")
    for n in (int(x) for x in args.sources.split(",")):
        world = SourceWorld.from_spec(WorldSpec(args.rows, n, PriorSpec.beta(0.6), seed=1))
        for name, fn in cases(world, args.rows, n).items():
            t_py = min(timeit.repeat(lambda: fn(_kernels_py), number=1, repeat=args.repeat)) * 1e3
            if compiled is None:
                print(f"{name:<22}{n:>6}{t_py:>12.2f}{'-':>12}{'-':>9}")
                continue
            if not same(fn(_kernels_py), fn(compiled)):
                raise SystemExit(f"{name} N={n}: backends disagree")
            t_cy = min(timeit.repeat(lambda: fn(compiled), number=1, repeat=args.repeat)) * 1e3
            print(f"{name:<22}{n:>6}{t_py:>12.2f}{t_cy:>12.2f}{t_py / t_cy:>8.1f}x")


if __name__ == "__main__":
    main()
