#!/usr/bin/env python3
"""Compare the annealed tour solver against exact optima on random instances.

Prints one row per instance: exact cost, single-run cost, best-of-k cost,
and the ratios. Useful when tuning the schedule or the move set.

    python3 scripts/sa_benchmark.py --instances 20 --n 10 --seeds 3
"""

from __future__ import annotations

import argparse
import random
import sys
import time
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT / "tests"))

from citywalk.geo import GeoPoint, build_distance_matrix  # noqa: E402
from citywalk.spatial import SAParams, solve_tsp_sa  # noqa: E402

from oracles import held_karp_closed  # noqa: E402

KM_IN_LAT_DEG = 1.0 / 111.19492664455873


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--instances", type=int, default=20)
    parser.add_argument("--n", type=int, default=10, help="cities per instance")
    parser.add_argument("--seeds", type=int, default=3, help="SA restarts per instance")
    parser.add_argument("--square-km", type=float, default=5.0)
    parser.add_argument("--rng-seed", type=int, default=202)
    args = parser.parse_args()

    rng = random.Random(args.rng_seed)
    side = args.square_km * KM_IN_LAT_DEG
    print("instance\texact_m\tsa_m\tbest_of_k_m\tratio\tbest_ratio")
    ratios, best_ratios = [], []
    started = time.perf_counter()
    for index in range(args.instances):
        points = [
            GeoPoint(rng.uniform(0, side), rng.uniform(0, side)) for _ in range(args.n)
        ]
        matrix = build_distance_matrix(points)
        exact = held_karp_closed(matrix)
        costs = [
            solve_tsp_sa(matrix, SAParams(seed=s)).cost for s in range(args.seeds)
        ]
        ratios.append(costs[0] / exact)
        best_ratios.append(min(costs) / exact)
        print(
            f"{index}\t{exact:.1f}\t{costs[0]:.1f}\t{min(costs):.1f}"
            f"\t{ratios[-1]:.4f}\t{best_ratios[-1]:.4f}"
        )
    elapsed = time.perf_counter() - started
    median = sorted(ratios)[len(ratios) // 2]
    print(f"# median single-run ratio: {median:.4f}")
    print(f"# worst best-of-{args.seeds} ratio: {max(best_ratios):.4f}")
    print(f"# wall time: {elapsed:.2f}s")


if __name__ == "__main__":
    main()
