#!/usr/bin/env python3
"""Benchmark the particle kernels: numba JIT vs the pure-numpy fallback.

The cloud-in-cell moment deposition and the linear gather are the hot
inner loops of the particle solver.  This script times both code paths on
identical inputs and prints a table (or JSON with --output).

The selected path in the package follows SIM_NUMBA: unset or "1" picks the
JIT kernels when numba imports, "0" forces the numpy fallback.
"""
import argparse
import json
import time

import numpy as np

from dragflow import kernels

TWO_PI = 2.0 * np.pi


def bench(func, args, warmup=3, runs=7):
    for _ in range(warmup):
        func(*args)
    times = []
    for _ in range(runs):
        start = time.perf_counter()
        out = func(*args)
        times.append(time.perf_counter() - start)
    checksum = float(np.sum(out[0] if isinstance(out, tuple) else out))
    return {"min": min(times), "mean": sum(times) / len(times), "checksum": checksum}


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--particles", type=int, default=2_000_000)
    parser.add_argument("--grid", type=int, default=256)
    parser.add_argument("--seed", type=int, default=42)
    parser.add_argument("--output", "-o", help="write JSON results to this path")
    args = parser.parse_args()

    rng = np.random.default_rng(args.seed)
    x = rng.uniform(0.0, TWO_PI, args.particles)
    xi = rng.standard_normal(args.particles)
    w = rng.uniform(0.5, 1.5, args.particles)
    values = rng.standard_normal(args.grid)
    dx = TWO_PI / args.grid

    results = {
        "particles": args.particles,
        "grid": args.grid,
        "have_numba": kernels.HAVE_NUMBA,
        "kernels": {},
    }

    cases = [
        ("deposit_numpy", kernels.deposit_moments_numpy, (x, xi, w, args.grid, dx)),
        ("gather_numpy", kernels.gather_numpy, (values, x, dx)),
    ]
    if kernels.HAVE_NUMBA:
        cases += [
            ("deposit_numba", kernels.deposit_moments_numba, (x, xi, w, args.grid, dx)),
            ("gather_numba", kernels.gather_numba, (values, x, dx)),
        ]

    for name, func, call_args in cases:
        results["kernels"][name] = bench(func, call_args)

    if args.output:
        with open(args.output, "w") as fh:
            json.dump(results, fh, indent=2)

    print(f"particles={args.particles} grid={args.grid} numba={kernels.HAVE_NUMBA}")
    print(f"{'kernel':<16} {'min [ms]':>10} {'mean [ms]':>10}")
    for name, row in results["kernels"].items():
        print(f"{name:<16} {row['min'] * 1e3:>10.2f} {row['mean'] * 1e3:>10.2f}")
    if kernels.HAVE_NUMBA:
        for op in ("deposit", "gather"):
            speedup = (
                results["kernels"][f"{op}_numpy"]["min"]
                / results["kernels"][f"{op}_numba"]["min"]
            )
            print(f"{op}: numba speedup {speedup:.1f}x")


if __name__ == "__main__":
    main()
