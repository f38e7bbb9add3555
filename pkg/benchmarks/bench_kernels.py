"""Compare the compiled and numpy backends of the resolvent sweep.

    python benchmarks/bench_kernels.py --n 20000 --k 10 --columns 64
"""

import argparse
import time

import numpy as np

from cnsmooth import kernels
from cnsmooth.chain import solve_resolvent_columns
from cnsmooth.data import DataMatrix
from cnsmooth.graph import build_knn_graph


def _best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=20000)
    ap.add_argument("--d", type=int, default=8)
    ap.add_argument("--k", type=int, default=10)
    ap.add_argument("--columns", type=int, default=64)
    ap.add_argument("--lam", type=float, default=0.05)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    rng = np.random.default_rng(args.seed)
    W = build_knn_graph(DataMatrix(rng.standard_normal((args.n, args.d))), args.k)
    x = rng.random((args.n, args.columns))
    rhs = np.zeros_like(x)
    out = np.empty_like(x)
    change = np.empty(args.columns)
    targets = rng.choice(args.n, size=args.columns, replace=False)

    names = ["python"] + (["cython"] if kernels.HAVE_EXTENSION else [])
    print(f"n={args.n} k={args.k} columns={args.columns} lambda={args.lam}")
    print(f"{'backend':>8} {'sweep ms':>10} {'solve s':>9}")
    results = {}
    for name in names:
        with kernels.use_backend(name):
            sweep = _best_of(lambda: kernels.resolvent_sweep(W, 1 - args.lam, rhs, x, out, change), args.repeat)
            solve = _best_of(lambda: solve_resolvent_columns(W, args.lam, targets), 1)
            cols = solve_resolvent_columns(W, args.lam, targets)
        results[name] = np.column_stack([c.values for c in cols])
        print(f"{name:>8} {1e3 * sweep:10.2f} {solve:9.2f}")
    if len(results) == 2:
        diff = np.abs(results["python"] - results["cython"]).max()
        print(f"max |python - cython| over solved columns: {diff:.2e}")
    else:
        print("compiled extension not built; only the numpy backend was timed")


if __name__ == "__main__":
    main()
