"""Time the compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--json out.json]
"""
from __future__ import annotations

import argparse
import json
import math
import timeit

import numpy as np

from nldiff import _pure
from nldiff.stochastic import _cdf, poisson_cdf

try:
    from nldiff import _core
except ImportError:  # pragma: no cover - depends on the build
    _core = None


def _best(fn, repeat: int) -> float:
    fn()  # warm up
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def bench_correlate(J: int, n: int, rows: int, repeat: int) -> dict:
    rng = np.random.default_rng(0)
    ext = rng.random((rows, n + 2 * J))
    w = rng.random(2 * J + 1)
    w /= w.sum()
    out = np.empty((rows, n))
    res = {"kernel": "correlate", "size": f"J={J} n={n} rows={rows}"}
    for name, mod in (("cython", _core), ("python", _pure)):
        if mod is not None:
            res[name] = _best(lambda: mod.correlate(ext, w, 0, out), repeat)
    return res


def bench_walk(particles: int, t: float, repeat: int) -> dict:
    J, n = 100, 200
    start = _cdf(np.sin(np.linspace(0, math.pi, n + 1)) ** 2 + 1e-3)
    jumps = _cdf(np.ones(2 * J + 1))
    args = (np.uint64(42), 0, particles, start, poisson_cdf(t), jumps, J, n, True, False)
    res = {"kernel": "walk", "size": f"M={particles} t={t}"}
    for name, mod in (("cython", _core), ("python", _pure)):
        if mod is not None:
            res[name] = _best(lambda: mod.walk(*args), repeat)
    return res


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--json", help="also write the table as JSON")
    args = ap.parse_args(argv)

    rows = [
        bench_correlate(10, 200, 1, args.repeat),
        bench_correlate(100, 200, 1, args.repeat),
        bench_correlate(100, 200, 250, args.repeat),
        bench_correlate(256, 2000, 1, args.repeat),
        bench_walk(65536, 1.0, args.repeat),
        bench_walk(65536, 5.0, args.repeat),
    ]
    print(f"{'kernel':<10} {'size':<24} {'cython [ms]':>12} {'python [ms]':>12} {'speedup':>8}")
    for r in rows:
        c, p = r.get("cython"), r.get("python")
        speed = f"{p / c:8.1f}" if c else "     n/a"
        cs = f"{1e3 * c:12.3f}" if c else f"{'n/a':>12}"
        print(f"{r['kernel']:<10} {r['size']:<24} {cs} {1e3 * p:12.3f} {speed}")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(rows, fh, indent=2)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
