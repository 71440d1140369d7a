#!/usr/bin/env python3
"""Compare solver throughput across backends at the acceptance scale.

Usage: python benchmarks/throughput.py [--steps N] [--particles N]
The NumPy backend runs a reduced step count; it is roughly an order of
magnitude slower than the compiled extension.
"""

import argparse
import os

from mudflow import backends
from mudflow.bench import BENCH_DIMS, BENCH_PARTICLES, make_benchmark_sim, measure_throughput


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--steps", type=int, default=60)
    parser.add_argument("--particles", type=int, default=BENCH_PARTICLES)
    args = parser.parse_args()

    print(f"grid {BENCH_DIMS[0]}x{BENCH_DIMS[1]}x{BENCH_DIMS[2]} nodes, "
          f"{args.particles} particles, cpu_count={os.cpu_count()}")
    for backend in backends.available_backends():
        steps = args.steps if backend == "compiled" else max(4, args.steps // 10)
        sim = make_benchmark_sim(backend=backend, n_particles=args.particles)
        rate = measure_throughput(sim, steps=steps)
        print(f"  {backend:>8}: {rate:7.2f} steps/s  ({1000.0 / rate:7.2f} ms/step, "
              f"{steps} steps)")


if __name__ == "__main__":
    main()
