#!/usr/bin/env python3
"""Compiled vs numpy Monte Carlo kernel: throughput and stream identity.

    python3 benchmarks/bench_mc.py --pulses 10000000 --repeat 3
"""
from __future__ import annotations

import argparse
import os
import statistics
import time

import numpy as np

from tripletsim.mc import KERNELS, SimulationConfig, simulate_batch_parallel
from tripletsim.params import SourceParameters


def run(cfg: SimulationConfig, partitions: int, repeat: int):
    times, stream = [], None
    for _ in range(repeat):
        t0 = time.perf_counter()
        stream = simulate_batch_parallel(cfg, partitions)
        times.append(time.perf_counter() - t0)
    return min(times), statistics.median(times), stream


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--pulses", type=int, default=10_000_000)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--jitter", type=float, default=0.0)
    ap.add_argument("--leak", type=float, default=0.0, help="coupler leakage probability")
    ap.add_argument("--partitions", type=int, nargs="*",
                    default=[1, min(8, os.cpu_count() or 1)])
    args = ap.parse_args()

    physics = SourceParameters().with_path("leakage.coupler_leak", args.leak)
    available = [b for b in ("compiled", "python") if b in KERNELS]
    print(f"backends available: {available}; pulses={args.pulses:.3g}")
    results, timings = {}, {}
    for backend in available:
        cfg = SimulationConfig(pulses=args.pulses, seed=args.seed, jitter_sigma=args.jitter,
                               physics=physics, backend=backend)
        for parts in sorted(set(args.partitions)):
            best, med, stream = run(cfg, parts, args.repeat)
            results[(backend, parts)] = stream
            timings[(backend, parts)] = best
            print(f"{backend:>9} partitions={parts:<3} best {best:7.3f} s  median {med:7.3f} s"
                  f"  {args.pulses / best / 1e6:8.2f} Mpulse/s  records={len(stream)}")

    ref = next(iter(results.values()))
    for key, s in results.items():
        same = (np.array_equal(s.pulse_index, ref.pulse_index)
                and np.array_equal(s.mask, ref.mask))
        if s.offsets is not None:
            same = same and np.allclose(s.offsets, ref.offsets, rtol=1e-12, atol=0.0,
                                        equal_nan=True)
        print(f"identical to {list(results)[0]}: {key} -> {same}")
    if ("compiled", 1) in timings and ("python", 1) in timings:
        print(f"speedup compiled/python (1 partition): "
              f"{timings[('python', 1)] / timings[('compiled', 1)]:.1f}x")


if __name__ == "__main__":
    main()
