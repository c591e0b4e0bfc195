"""Isolation Forest scoring of day vectors.

Trees are stored as flat node arrays (feature, threshold, children, leaf size)
so a whole batch of points can be routed level by level.
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DataError

log = logging.getLogger(__name__)

EULER_GAMMA = 0.5772156649


def harmonic(i: float) -> float:
    return math.log(i) + EULER_GAMMA


def c_factor(m: int) -> float:
    """Average path length of an unsuccessful BST search over ``m`` items."""
    if m <= 1:
        return 0.0
    if m == 2:
        return 1.0
    return 2.0 * harmonic(m - 1) - 2.0 * (m - 1) / m


@dataclass
class IsolationTree:
    feature: np.ndarray    # -1 at leaves
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    size: np.ndarray       # subsample count reaching each node
    depth: np.ndarray
    height_limit: int
    sample_index: Optional[np.ndarray] = None

    def path_lengths(self, x: np.ndarray) -> np.ndarray:
        node = np.zeros(x.shape[0], dtype=np.int64)
        rows = np.arange(x.shape[0])
        for _ in range(self.height_limit + 1):
            f = self.feature[node]
            inner = f >= 0
            if not inner.any():
                break
            r, nd = rows[inner], node[inner]
            go_left = x[r, f[inner]] < self.threshold[nd]
            node[inner] = np.where(go_left, self.left[nd], self.right[nd])
        sizes = self.size[node]
        adj = np.array([c_factor(int(s)) for s in range(int(sizes.max()) + 1)])
        return self.depth[node] + adj[sizes]

    def to_nested(self, node: int = 0):
        """``[size]`` for a leaf, ``[feature, threshold, left, right]`` inside."""
        if self.feature[node] < 0:
            return [int(self.size[node])]
        return [int(self.feature[node]), float(self.threshold[node]),
                self.to_nested(int(self.left[node])), self.to_nested(int(self.right[node]))]

    @classmethod
    def from_nested(cls, nested, height_limit: int) -> "IsolationTree":
        feat, thr, left, right, size, depth = [], [], [], [], [], []

        def walk(item, d):
            i = len(feat)
            feat.append(-1); thr.append(0.0); left.append(-1); right.append(-1)
            size.append(0); depth.append(d)
            if len(item) == 1:
                size[i] = item[0]
                return i, item[0]
            feat[i], thr[i] = item[0], item[1]
            li, ls = walk(item[2], d + 1)
            ri, rs = walk(item[3], d + 1)
            left[i], right[i], size[i] = li, ri, ls + rs
            return i, size[i]

        walk(nested, 0)
        return cls(np.array(feat), np.array(thr, dtype=float), np.array(left), np.array(right),
                   np.array(size), np.array(depth, dtype=float), height_limit)


def _uniform_open(rng, lo: float, hi: float) -> float:
    while True:
        v = rng.uniform(lo, hi)
        if lo < v < hi:
            return float(v)


def build_tree(sample: np.ndarray, height_limit: int, rng: np.random.Generator) -> IsolationTree:
    feat, thr, left, right, size, depth = [], [], [], [], [], []
    stack = [(np.arange(sample.shape[0]), 0, -1, False)]
    while stack:
        idx, d, parent, is_right = stack.pop()
        i = len(feat)
        feat.append(-1); thr.append(0.0); left.append(-1); right.append(-1)
        size.append(idx.size); depth.append(d)
        if parent >= 0:
            (right if is_right else left)[parent] = i
        if idx.size <= 1 or d >= height_limit:
            continue
        sub = sample[idx]
        lo, hi = sub.min(axis=0), sub.max(axis=0)
        varying = np.flatnonzero(hi > lo)
        if varying.size == 0:
            continue
        q = int(varying[rng.integers(varying.size)])
        p = _uniform_open(rng, lo[q], hi[q])
        feat[i], thr[i] = q, p
        mask = sub[:, q] < p
        stack.append((idx[~mask], d + 1, i, True))
        stack.append((idx[mask], d + 1, i, False))
    return IsolationTree(np.array(feat), np.array(thr, dtype=float), np.array(left), np.array(right),
                         np.array(size), np.array(depth, dtype=float), height_limit)


@dataclass
class IsolationForestModel:
    trees: list
    psi: int
    seed: int
    c_psi: float
    n_features: int

    def to_json(self) -> dict:
        return {
            "seed": self.seed, "psi": self.psi, "c_psi": self.c_psi, "n_trees": len(self.trees),
            "n_features": self.n_features,
            "height_limit": self.trees[0].height_limit if self.trees else 0,
            "trees": [t.to_nested() for t in self.trees],
        }

    @classmethod
    def from_json(cls, d: dict) -> "IsolationForestModel":
        trees = [IsolationTree.from_nested(t, d["height_limit"]) for t in d["trees"]]
        return cls(trees, d["psi"], d["seed"], d["c_psi"], d["n_features"])


def fit_iforest(points, n_trees: int = 100, psi: int = 256, seed: int = 0, threads: int = 1) -> IsolationForestModel:
    """Tree ``t`` is built from ``default_rng([seed, t])``; results ignore ``threads``."""
    x = np.asarray(points, dtype=float)
    if x.ndim != 2 or x.shape[0] < 2:
        raise DataError("isolation forest needs at least two points")
    if psi < 2:
        raise DataError("psi must be >= 2")
    if n_trees < 1:
        raise DataError("need at least one tree")
    n = x.shape[0]
    m = min(psi, n)
    limit = math.ceil(math.log2(m))

    def one(t):
        rng = np.random.default_rng([seed, t])
        idx = np.sort(rng.choice(n, size=m, replace=False))
        tree = build_tree(x[idx], limit, rng)
        tree.sample_index = idx
        return tree

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            trees = list(pool.map(one, range(n_trees)))
    else:
        trees = [one(t) for t in range(n_trees)]
    return IsolationForestModel(trees, m, seed, c_factor(m), x.shape[1])


def path_length(tree: IsolationTree, x) -> float:
    return float(tree.path_lengths(np.atleast_2d(np.asarray(x, dtype=float)))[0])


def anomaly_scores(model: IsolationForestModel, points, threads: int = 1) -> np.ndarray:
    """Raw scores ``2 ** (-E[h(x)] / c(psi))`` for a batch of points."""
    x = np.atleast_2d(np.asarray(points, dtype=float))
    if x.shape[1] != model.n_features:
        raise DataError(f"expected {model.n_features} features, got {x.shape[1]}")
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            per_tree = list(pool.map(lambda t: t.path_lengths(x), model.trees))
    else:
        per_tree = [t.path_lengths(x) for t in model.trees]
    # normalise per tree before averaging so E[h] == c(psi) gives exactly 0.5
    ratio = np.zeros(x.shape[0])
    for h in per_tree:
        ratio += h / model.c_psi
    return 2.0 ** (-(ratio / len(per_tree)))


def anomaly_score(model: IsolationForestModel, x) -> float:
    return float(anomaly_scores(model, x)[0])


def score_from_mean_path(mean_path: float, c_psi: float) -> float:
    return 2.0 ** (-mean_path / c_psi)


def scale_scores(raw) -> np.ndarray:
    """Min-max rescale to [0, 1]; all-equal input maps to zeros with a warning."""
    raw = np.asarray(raw, dtype=float)
    lo, hi = raw.min(), raw.max()
    if hi <= lo:
        log.warning("all raw anomaly scores are equal; scaled scores set to 0")
        return np.zeros_like(raw)
    return (raw - lo) / (hi - lo)
