"""Isolation Forest on Gaussian inliers with planted far points.

Prints rank AUC and how many of the planted points reach the top ten, per
seed. With scikit-learn installed the same numbers are printed for its
IsolationForest as a reference.

    python scripts/planted_iforest.py --seeds 20 --radius 8
"""
import argparse
import sys

import numpy as np

from nasdisrupt.iforest import anomaly_scores, fit_iforest


def planted(seed, n_in, n_out, dims, radius):
    rng = np.random.default_rng(seed)
    inliers = rng.normal(size=(n_in, dims))
    d = rng.normal(size=(n_out, dims))
    outliers = radius * d / np.linalg.norm(d, axis=1, keepdims=True)
    return np.vstack([inliers, outliers]), np.r_[np.zeros(n_in, bool), np.ones(n_out, bool)]


def auc(scores, positive):
    # Mann-Whitney form, ties count half
    pos, neg = scores[positive], scores[~positive]
    return ((pos[:, None] > neg).sum() + 0.5 * (pos[:, None] == neg).sum()) / (len(pos) * len(neg))


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, default=10)
    ap.add_argument("--inliers", type=int, default=1000)
    ap.add_argument("--outliers", type=int, default=10)
    ap.add_argument("--dims", type=int, default=24)
    ap.add_argument("--radius", type=float, default=8.0)
    args = ap.parse_args()

    try:
        from sklearn.ensemble import IsolationForest
    except ImportError:
        IsolationForest = None

    print("seed   auc  top10" + ("   sk_auc sk_top10" if IsolationForest else ""))
    for seed in range(args.seeds):
        x, y = planted(seed, args.inliers, args.outliers, args.dims, args.radius)
        s = anomaly_scores(fit_iforest(x, 100, 256, seed=seed), x)
        line = f"{seed:4d} {auc(s, y):.3f} {y[np.argsort(-s)[:10]].sum():6d}"
        if IsolationForest is not None:
            r = -IsolationForest(n_estimators=100, max_samples=256, random_state=seed).fit(x).score_samples(x)
            line += f"    {auc(r, y):.3f} {y[np.argsort(-r)[:10]].sum():8d}"
        print(line)
    return 0


if __name__ == "__main__":
    sys.exit(main())
