"""Silhouette / within-cluster scatter sweep over k for a finished run.

Reads ``pca_scores.csv`` from a results directory and prints the sweep table
with its advisory flags.

    python scripts/k_sweep.py demo_run/results --kmax 20
"""
import argparse
import sys
from pathlib import Path

import pandas as pd

from nasdisrupt.kmeans import sweep_k


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("results", type=Path)
    ap.add_argument("--kmin", type=int, default=2)
    ap.add_argument("--kmax", type=int, default=20)
    ap.add_argument("--seed", type=int, default=2024)
    ap.add_argument("--restarts", type=int, default=10)
    ap.add_argument("--threads", type=int, default=1)
    args = ap.parse_args()

    scores = pd.read_csv(args.results / "pca_scores.csv", index_col="day")
    table = sweep_k(scores.to_numpy(), range(args.kmin, args.kmax + 1), seed=args.seed,
                    restarts=args.restarts, threads=args.threads)
    print(f"{len(scores)} days x {scores.shape[1]} components")
    print(table.to_string(index=False))
    return 0


if __name__ == "__main__":
    sys.exit(main())
