"""Run both Gap tests on planted rank-2 data over many seeds and count recoveries."""

import argparse
import time

import numpy as np

from blogfeat import pca
from blogfeat.synthetic import planted_rank2


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seeds", type=int, default=20)
    ap.add_argument("--B", type=int, default=20)
    ap.add_argument("--n", type=int, default=500)
    ap.add_argument("--p", type=int, default=20)
    ap.add_argument("--noise-var", type=float, default=0.01)
    ap.add_argument("--reference", choices=["box", "pca"], default="box")
    args = ap.parse_args()

    start = time.perf_counter()
    hits = {"RE": 0, "EV": 0}
    for seed in range(args.seeds):
        X = planted_rank2(seed, n=args.n, p=args.p, noise_var=args.noise_var)
        row = []
        for i, v in enumerate(("RE", "EV")):
            rep = pca.gap_test(X, args.B, v, np.random.default_rng([seed, i]), reference=args.reference)
            hits[v] += rep.k_star == 2
            row.append(f"{v} k*={rep.k_star}")
        print(f"seed {seed:3d}: " + ", ".join(row))
    print(f"recovered k=2: RE {hits['RE']}/{args.seeds}, EV {hits['EV']}/{args.seeds} "
          f"in {time.perf_counter() - start:.2f}s")


if __name__ == "__main__":
    main()
