"""Compare the compiled kernels with the pure-Python fallback.

    python3 benchmarks/bench_kernels.py [--repeat 3]

Each case runs both implementations on identical inputs, checks that the
outputs agree exactly, and prints the best wall time of each.
"""
import argparse
import time

import numpy as np

from pulledsaw import kernels

CASES = [
    ("count positive d=2 n=11", "count", (2, 11, kernels.POSITIVE)),
    ("count unfolded d=2 n=14", "count", (2, 14, kernels.UNFOLDED)),
    ("count full d=3 n=7", "count", (3, 7, kernels.FULL)),
    ("flatperm d=2 n=10 2000 tours", "perm", (2, 10, 2000, 12345)),
    ("flatperm d=3 n=12 500 tours", "perm", (3, 12, 500, 777)),
]


def _run(impl, kind, args):
    if kind == "count":
        return impl.count_walks(*args, (), False, 0)
    return impl.flatperm_batch(*args)


def _best(fn, repeat):
    best = float("inf")
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def _same(a, b):
    if isinstance(a, tuple):
        return all(np.array_equal(x, y) for x, y in zip(a, b))
    return np.array_equal(a, b)


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=3)
    args = p.parse_args(argv)
    if not kernels.HAVE_COMPILED:
        print("compiled kernels not built; only the fallback is available")
        return 1
    print(f"{'case':34s} {'compiled [s]':>12s} {'python [s]':>11s} {'speedup':>8s}  equal")
    for name, kind, cargs in CASES:
        tc, oc = _best(lambda: _run(kernels.compiled, kind, cargs), args.repeat)
        tp, op = _best(lambda: _run(kernels.pure, kind, cargs), 1)
        print(f"{name:34s} {tc:12.4f} {tp:11.3f} {tp / tc:8.0f}x  {_same(oc, op)}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
