"""Compare the compiled and pure-Python simulation sweeps.

Usage: python3 benchmarks/bench_sweep.py [--n 10000] [--t 0.5] [--repeat 3]
"""

import argparse
import time

import numpy as np

from cpgdist.model import jc_cpg_params
from cpgdist.simulator import BACKENDS, evolve


def run(backend, params, n, t, seed):
    rng = np.random.default_rng(seed)
    start = rng.integers(0, 4, size=n, dtype=np.uint8)
    t0 = time.perf_counter()
    out = evolve(start, params, t, rng, backend)
    return time.perf_counter() - t0, out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=10_000)
    ap.add_argument("--t", type=float, default=0.5)
    ap.add_argument("--r", type=float, default=10.0)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    params = jc_cpg_params(args.r)
    best, outputs = {}, {}
    for backend in BACKENDS:
        times = []
        for k in range(args.repeat):
            dt, outputs[backend] = run(backend, params, args.n, args.t, seed=k)
            times.append(dt)
        best[backend] = min(times)
        print(f"{backend:>7}: best of {args.repeat}: {best[backend] * 1e3:9.2f} ms  (N={args.n}, t={args.t}, r={args.r})")
    if len(best) == 2:
        same = np.array_equal(outputs["cython"], outputs["python"])
        print(f"speedup: {best['python'] / best['cython']:.1f}x, identical output: {same}")


if __name__ == "__main__":
    main()
