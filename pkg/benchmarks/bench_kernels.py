"""Timing comparison of the contact kernel's two execution paths.

Runs the same bound-constrained solves through the numba-compiled
kernel and the plain interpreted version, on the actual band matrices
the shape solver builds for random voltage commands.

Usage: python3 benchmarks/bench_kernels.py [--repeats 5] [--solves 200]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from softcrawl import kernels
from softcrawl.shape import RobotParams, _assemble_bands, actuation_moment_profile


def build_problems(n_problems: int, seed: int = 0):
    params = RobotParams()
    rng = np.random.default_rng(seed)
    problems = []
    for _ in range(n_problems):
        v = rng.uniform(params.v_lower, params.v_upper, params.n_actuators)
        moment = actuation_moment_profile(params, v)
        h0, h1, h2, f = _assemble_bands(params, moment)
        drop_tol = 1e-13 * max(1.0, float(np.abs(f).max()))
        ridge = 1e-12 * float(h0.max())
        problems.append((h0, h1, h2, f, 10000, drop_tol, ridge))
    return problems


def run(fn, problems):
    t0 = time.perf_counter()
    iters = 0
    for args in problems:
        _, _, _, it, status = fn(*args)
        assert status == kernels.STATUS_OK
        iters += it
    return time.perf_counter() - t0, iters


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--solves", type=int, default=200)
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()

    problems = build_problems(args.solves)
    paths = [("pure numpy", kernels.contact_active_set_py)]
    if kernels.NUMBA_ENABLED:
        # Warm up the JIT outside the timed region.
        kernels.contact_active_set(*problems[0])
        paths.append(("numba njit", kernels.contact_active_set))
    else:
        print("numba disabled (flag or missing package); timing only numpy")

    results = {}
    for name, fn in paths:
        best = min(run(fn, problems)[0] for _ in range(args.repeats))
        results[name] = best
        per_solve = best / args.solves * 1e3
        print(f"{name:>11}: {best:8.3f} s for {args.solves} solves "
              f"({per_solve:7.3f} ms/solve)")

    if len(results) == 2:
        speedup = results["pure numpy"] / results["numba njit"]
        print(f"{'speedup':>11}: {speedup:7.1f}x")


if __name__ == "__main__":
    main()
