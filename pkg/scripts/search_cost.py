"""Candidate-solve counts and wall time of the two search modes.

    python3 scripts/search_cost.py --q 10 100 1000 --reps 20
"""
import argparse
import math
import sys
import time

import numpy as np

from lrin.gauges import Flavor, NormSpec, ScaledNorm
from lrin.streams import stream
from lrin.vecprox import SearchMode, prox_vec_info


def bound(q, r):
    return 4 * (1 + math.log2(r + 1)) * (1 + math.log2(q - r + 1))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--q", type=int, nargs="+", default=[10, 100, 1000])
    ap.add_argument("--reps", type=int, default=20)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    rng = stream(args.seed, "search-cost")
    print(f"{'q':>6} {'r':>5} {'flavor':>6} {'sq':>3} {'bin solves':>10} {'bound':>7} "
          f"{'enum solves':>11} {'bin ms':>8} {'enum ms':>8}")
    for q in args.q:
        for r in sorted({1, max(1, q // 20), max(1, q // 2), q}):
            for flavor in Flavor:
                for squared in (False, True):
                    counts = {m: [] for m in SearchMode}
                    times = {m: 0.0 for m in SearchMode}
                    for _ in range(args.reps):
                        z = rng.standard_normal(q)
                        f = ScaledNorm(NormSpec(flavor, r), float(10 ** rng.uniform(-1, 1)), squared)
                        for m in SearchMode:
                            t0 = time.perf_counter()
                            res = prox_vec_info(z, f, m)
                            times[m] += time.perf_counter() - t0
                            counts[m].append(res.candidate_solves)
                    b, e = SearchMode.BINARY_SEARCH, SearchMode.ENUMERATE
                    print(f"{q:6d} {r:5d} {flavor.value:>6} {'y' if squared else 'n':>3} "
                          f"{max(counts[b]):10d} {bound(q, r):7.0f} {max(counts[e]):11d} "
                          f"{1e3 * times[b] / args.reps:8.3f} {1e3 * times[e] / args.reps:8.3f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
