"""Time the numba kernels against their pure-numpy fallbacks.

Usage::

    python3 benchmarks/bench_kernels.py [--repeat 5] [--size 200000] [--json out.json]
"""

from __future__ import annotations

import argparse
import json
import sys
import timeit

import numpy as np

from tempologic import kernels


def cases(size: int, rng: np.random.Generator):
    tp, tt = rng.uniform(0, 10, (2, size))
    currents = rng.uniform(0, 300, size)
    currents[::997] = 2e4
    delivery = rng.exponential(0.5, size)
    return {
        "apparent_time_grid": (
            lambda: kernels._apparent_time_grid_np(tp, tt),
            lambda: kernels._apparent_time_grid_nb(tp, tt)),
        "leaky_integrate": (
            lambda: kernels._leaky_integrate_np(0.0, 0.0, 0.01, 1.0, 1e4, 1e-4, currents, 15.9),
            lambda: kernels._leaky_integrate_nb(0.0, 0.0, 0.01, 1.0, 1e4, 1e-4, currents, 15.9)),
        "serial_bus_completions": (
            lambda: kernels._serial_bus_completions_np(1.0, delivery),
            lambda: kernels._serial_bus_completions_nb(1.0, delivery)),
    }


def best_of(fn, repeat: int) -> float:
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--size", type=int, default=200_000)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--json", help="also write results to this file")
    args = parser.parse_args(argv)

    if not kernels.NUMBA_AVAILABLE:
        print("numba is not installed; nothing to compare", file=sys.stderr)
        return 1

    results = []
    for name, (np_fn, nb_fn) in cases(args.size, np.random.default_rng(args.seed)).items():
        nb_fn()  # compile outside the timed region
        t_np = best_of(np_fn, args.repeat)
        t_nb = best_of(nb_fn, args.repeat)
        results.append({"kernel": name, "size": args.size, "numpy_s": t_np,
                        "numba_s": t_nb, "speedup": t_np / t_nb})

    print(f"{'kernel':<24}{'numpy [s]':>12}{'numba [s]':>12}{'speedup':>10}")
    for r in results:
        print(f"{r['kernel']:<24}{r['numpy_s']:>12.5f}{r['numba_s']:>12.5f}{r['speedup']:>10.1f}")
    if args.json:
        with open(args.json, "w", encoding="utf-8") as fh:
            json.dump(results, fh, indent=2)
    return 0


if __name__ == "__main__":
    sys.exit(main())
