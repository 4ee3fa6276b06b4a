"""Time the numba kernels against their numpy fallbacks.

Run ``python3 benchmarks/bench_kernels.py`` to compare both backends, or
``DDROP_NUMBA=0 python3 benchmarks/bench_kernels.py --backend env`` to time
whatever the environment selects.  JIT compilation is excluded by a warm-up
call; every timing is the best of ``--repeat`` runs.
"""

import argparse
import json
import os
import time
from fractions import Fraction

import numpy as np

from dimdrop import _kernels
from dimdrop.pattern import PLMap


def _random_maps(rng, count, knots):
    out = []
    for _ in range(count):
        xs = [Fraction(0)] + sorted({Fraction(int(v), 1000) for v in rng.integers(1, 1000, knots)}) + [Fraction(1)]
        ys = [Fraction(int(v), 1000) for v in rng.integers(0, 1001, len(xs))]
        out.append(PLMap(xs, ys))
    return out


def workloads(size, rng):
    """name -> zero-argument callable, sized by ``size``."""
    a = rng.uniform(0, 1, (size, size))
    b = rng.uniform(0, 1, (size, size))
    pts = rng.uniform(0, 1, (size, 2))
    da = np.linalg.norm(pts[:, None] - pts[None], axis=-1)
    phi = da + 0.1
    xs, ys, off = _kernels.pack_maps(_random_maps(rng, size, 8))
    grid = np.linspace(0, 1, 4 * size)
    vals = rng.uniform(0, 1, (size, 4 * size))
    return {
        "minplus": lambda: _kernels.minplus(a, b),
        "katetov_violations": lambda: _kernels.katetov_violations(da, da, phi),
        "pl_eval_batch": lambda: _kernels.pl_eval_batch(xs, ys, off, grid),
        "hausdorff_gap_columns": lambda: _kernels.hausdorff_gap_columns(vals),
    }


def best_time(fn, repeat):
    fn()  # warm-up, includes JIT compilation
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def run(backends, sizes, repeat, seed):
    rows = []
    saved = os.environ.get("DDROP_NUMBA")
    try:
        for size in sizes:
            jobs = workloads(size, np.random.default_rng(seed))
            for name, fn in jobs.items():
                row = {"kernel": name, "size": size}
                for be in backends:
                    if be != "env":
                        os.environ["DDROP_NUMBA"] = "1" if be == "numba" else "0"
                    row[_kernels.backend() if be == "env" else be] = best_time(fn, repeat)
                rows.append(row)
    finally:
        if saved is None:
            os.environ.pop("DDROP_NUMBA", None)
        else:
            os.environ["DDROP_NUMBA"] = saved
    return rows


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--sizes", type=int, nargs="+", default=[16, 64, 160])
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--backend", choices=["both", "numba", "numpy", "env"], default="both")
    parser.add_argument("--json", help="also write the rows to this file")
    args = parser.parse_args(argv)

    if args.backend == "both":
        backends = ["numba", "numpy"] if _kernels.HAVE_NUMBA else ["numpy"]
    else:
        backends = [args.backend]
    rows = run(backends, args.sizes, args.repeat, args.seed)

    cols = sorted({k for r in rows for k in r} - {"kernel", "size"})
    print(f"{'kernel':<24}{'size':>6}" + "".join(f"{c + ' [ms]':>14}" for c in cols) + ("   speedup" if len(cols) == 2 else ""))
    for r in rows:
        line = f"{r['kernel']:<24}{r['size']:>6}" + "".join(f"{r[c] * 1e3:>14.3f}" for c in cols)
        if {"numba", "numpy"} <= r.keys():
            line += f"{r['numpy'] / r['numba']:>10.1f}x"
        print(line)
    if args.json:
        with open(args.json, "w", encoding="utf-8") as fh:
            json.dump(rows, fh, indent=2)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
