#!/usr/bin/env python3
"""Benchmark the simulation backends against each other.

Runs the same workload on the compiled kernel and the pure-Python engine,
reports events per second, and verifies that both produced bit-identical
age integrals (they share one RNG stream and accumulation order, so any
difference is a bug, not noise).

Example:
    python benchmarks/bench_backends.py --n 6 --lambda-e 100 --horizon 2000
"""

import argparse
import time

import numpy as np

from keyage import net, sim


def bench_one(network, k, scheme, horizon, seed, backend, repeats):
    best = float("inf")
    result = None
    for _ in range(repeats):
        t0 = time.perf_counter()
        result = sim.run(network, k, scheme, horizon, seed, backend=backend,
                         record_series=False)
        best = min(best, time.perf_counter() - t0)
    return result, best


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=6, help="number of receivers")
    ap.add_argument("--lambda-e", type=float, default=100.0,
                    help="total gossip rate per node")
    ap.add_argument("--lambda-s", type=float, default=10.0,
                    help="source update rate")
    ap.add_argument("--k", type=int, default=2, help="keys required to decode")
    ap.add_argument("--scheme", choices=["memory", "memoryless", "both"],
                    default="both")
    ap.add_argument("--horizon", type=float, default=2000.0)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--repeats", type=int, default=3,
                    help="take the best of this many timings")
    args = ap.parse_args()

    network = net.shn(args.n, args.lambda_e, args.lambda_s)
    schemes = ["memory", "memoryless"] if args.scheme == "both" else [args.scheme]
    backends = sim.available_backends()
    print(f"backends: {', '.join(backends)}")
    print(f"n={args.n} lambda_e={args.lambda_e} lambda_s={args.lambda_s} "
          f"k={args.k} horizon={args.horizon}")

    for scheme in schemes:
        rows = {}
        for backend in backends:
            res, secs = bench_one(network, args.k, scheme, args.horizon,
                                  args.seed, backend, args.repeats)
            rows[backend] = (res, secs)
            rate = res.n_events / secs
            print(f"  {scheme:10s} {backend:7s} {res.n_events:>12,} events  "
                  f"{secs:8.3f}s  {rate / 1e6:8.2f} M events/s")
        if len(rows) == 2:
            (ra, _), (rb, _) = rows["cython"], rows["python"]
            if not np.array_equal(ra.age_integral, rb.age_integral):
                print("  MISMATCH: backends disagree on the age integrals")
                return 1
            speedup = rows["python"][1] / rows["cython"][1]
            print(f"  {scheme:10s} backends bit-identical, "
                  f"speedup x{speedup:.1f}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
