"""Compare the numba kernel against the pure-numpy inner solver.

Usage: python3 benchmarks/bench_accel.py [--starts N] [--repeat R]

Times the Rosenbrock circle protocol (first N starts) on both paths,
reports compile time separately, and checks that both paths produce
identical limit points and evaluation counts.
"""

import argparse
import time

import numpy as np

from iprox import ip_solve, reciprocal_barrier, rosenbrock_instance
from iprox.problems import circle_starting_points


def run(spec, barrier, starts, accel):
    t = time.perf_counter()
    results = [ip_solve(spec, barrier, x0, accel=accel) for x0 in starts]
    return time.perf_counter() - t, results


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--starts", type=int, default=4)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    spec, barrier = rosenbrock_instance(), reciprocal_barrier()
    starts = circle_starting_points(20)[: args.starts]

    t0 = time.perf_counter()
    ip_solve(spec, barrier, starts[0], accel=True)
    compile_s = time.perf_counter() - t0

    fast = min(run(spec, barrier, starts, True)[0] for _ in range(args.repeat))
    slow, ref = run(spec, barrier, starts, False)
    _, got = run(spec, barrier, starts, True)

    iters = sum(r.grad_evals for r in ref)
    same = all(
        np.array_equal(a.x, b.x) and a.grad_evals == b.grad_evals for a, b in zip(ref, got)
    )
    print(f"starts={len(starts)} gradient evaluations={iters}")
    print(f"numba first call (compile + run): {compile_s:8.3f} s")
    print(f"numba steady state:               {fast:8.3f} s")
    print(f"numpy:                            {slow:8.3f} s")
    print(f"speedup:                          {slow / fast:8.1f}x")
    print(f"identical results:                {same}")


if __name__ == "__main__":
    main()
