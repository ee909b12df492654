"""Timing harness for the transform cache.

Evaluates a batch of random sequences under one environment twice with a
shared cache, once more with the cache disabled, and reports per-pass
timings, the warm/cold speed-up and whether all three passes agree bit for
bit.
"""

from __future__ import annotations

import argparse
import statistics
import sys
from pathlib import Path
from time import perf_counter
from typing import List

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parent.parent))

from ddforge.services.coherence import coherence_value  # noqa: E402
from ddforge.services.noise_model import GaussianNsd  # noqa: E402
from ddforge.services.sequences import DdSequence, SegmentKind  # noqa: E402
from ddforge.services.spectral import FrequencyGrid, TransformCache  # noqa: E402


def _random_sequences(count: int, max_segments: int, seed: int) -> List[DdSequence]:
    rng = np.random.default_rng(seed)
    return [
        DdSequence(tuple(SegmentKind(int(code)) for code in rng.integers(4, size=int(rng.integers(1, max_segments + 1)))))
        for _ in range(count)
    ]


def _timed_pass(
    sequences: List[DdSequence], nsd: GaussianNsd, grid: FrequencyGrid, cache: TransformCache
) -> tuple[List[float], List[float]]:
    latencies: List[float] = []
    values: List[float] = []
    for sequence in sequences:
        start = perf_counter()
        values.append(coherence_value(sequence, nsd, grid, cache))
        latencies.append((perf_counter() - start) * 1000)
    return latencies, values


def run_benchmark(count: int, max_segments: int, n_points: int, seed: int) -> dict:
    grid = FrequencyGrid(n_points=n_points)
    nsd = GaussianNsd(y0=0.005, a=0.5, v_L=3.55, w1=0.006)
    sequences = _random_sequences(count, max_segments, seed)

    cache = TransformCache()
    cold_lat, cold = _timed_pass(sequences, nsd, grid, cache)
    warm_lat, warm = _timed_pass(sequences, nsd, grid, cache)
    off_lat, off = _timed_pass(sequences, nsd, grid, TransformCache(enabled=False))

    cold_ms, warm_ms, off_ms = sum(cold_lat), sum(warm_lat), sum(off_lat)
    return {
        "sequences": count,
        "grid_points": n_points,
        "cold_ms": round(cold_ms, 3),
        "warm_ms": round(warm_ms, 3),
        "uncached_ms": round(off_ms, 3),
        "speedup": round(cold_ms / warm_ms, 1) if warm_ms > 0 else float("inf"),
        "median_cold_ms": round(statistics.median(cold_lat), 3),
        "median_warm_ms": round(statistics.median(warm_lat), 3),
        "bit_identical": cold == warm == off,
        "cache_entries": len(cache),
        "hits": cache.hits,
        "misses": cache.misses,
    }


def main() -> None:
    parser = argparse.ArgumentParser(description="ddforge transform-cache benchmark")
    parser.add_argument("--sequences", type=int, default=50, help="Number of random sequences")
    parser.add_argument("--max-segments", type=int, default=10, help="Longest random sequence, in segments")
    parser.add_argument("--grid-points", type=int, default=4000, help="Frequency grid size")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    summary = run_benchmark(args.sequences, args.max_segments, args.grid_points, args.seed)
    print("Cache benchmark summary:")
    for key, value in summary.items():
        print(f"  {key}: {value}")


if __name__ == "__main__":
    main()
