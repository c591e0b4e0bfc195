"""K-Means day typologies: Lloyd iterations with k-means++ seeding, the
silhouette / within-cluster-scatter sweep, Table-I style cluster profiles and
rule-based typology labels.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np
import pandas as pd

from .errors import ConfigError, DataError

MAX_ITER = 300
SHIFT_TOL = 1e-6

TYPOLOGIES = ("Smooth", "RegionalDisturbance", "RegionalDisruption", "NASDisruption")
_TYPOLOGY_WORDS = {
    "Smooth": "Smooth", "RegionalDisturbance": "Disturbance",
    "RegionalDisruption": "Disruption", "NASDisruption": "Super Disruption",
}


@dataclass
class KMeansModel:
    k: int
    centroids: np.ndarray
    assignments: np.ndarray
    inertia: float
    seed: int
    restarts: int
    iterations: int
    best_restart: int = 0
    inertia_history: list = field(default_factory=list)

    def distances(self, points) -> np.ndarray:
        x = np.asarray(points, dtype=float)
        return np.sqrt(((x - self.centroids[self.assignments]) ** 2).sum(axis=1))

    def to_json(self) -> dict:
        return {
            "k": self.k, "seed": self.seed, "restarts": self.restarts,
            "iterations": self.iterations, "best_restart": self.best_restart,
            "inertia": float(self.inertia),
            "centroids": [[float(v) for v in row] for row in self.centroids],
        }


def _sq_dist(x: np.ndarray, c: np.ndarray) -> np.ndarray:
    # direct differences rather than the expanded form: exact zeros for coincident points
    return ((x[:, None, :] - c[None, :, :]) ** 2).sum(axis=2)


def _kmeanspp(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = x.shape[0]
    centers = [int(rng.integers(n))]
    d2 = ((x - x[centers[0]]) ** 2).sum(axis=1)
    for _ in range(1, k):
        total = d2.sum()
        if total <= 0:
            # all remaining mass sits on existing centres; pick any unused point
            unused = np.setdiff1d(np.arange(n), centers)
            nxt = int(unused[rng.integers(unused.size)])
        else:
            nxt = int(np.searchsorted(np.cumsum(d2), rng.random() * total, side="right"))
            nxt = min(nxt, n - 1)
        centers.append(nxt)
        d2 = np.minimum(d2, ((x - x[nxt]) ** 2).sum(axis=1))
    return x[centers].copy()


def _assign(x, c, k):
    d2 = _sq_dist(x, c)
    labels = d2.argmin(axis=1)
    best = d2[np.arange(x.shape[0]), labels]
    # repair empty clusters with the point farthest from its centroid
    for j in range(k):
        if not (labels == j).any():
            far = int(best.argmax())
            c[j] = x[far]
            labels[far] = j
            best[far] = 0.0
    return labels, best


def _lloyd(x: np.ndarray, k: int, rng: np.random.Generator):
    c = _kmeanspp(x, k, rng)
    history = []
    it = 0
    for it in range(1, MAX_ITER + 1):
        labels, best = _assign(x, c, k)
        history.append(float(best.sum()))
        new = np.vstack([x[labels == j].mean(axis=0) for j in range(k)])
        shift = float(np.sqrt(((new - c) ** 2).sum(axis=1)).max())
        c = new
        if shift < SHIFT_TOL:
            break
    labels, best = _assign(x, c, k)
    history.append(float(best.sum()))
    return c, labels, float(best.sum()), it, history


def fit_kmeans(points, k: int, seed: int, restarts: int = 10, threads: int = 1) -> KMeansModel:
    """Best of ``restarts`` Lloyd runs by inertia (ties: lower restart index).

    Restart ``r`` draws from ``default_rng([seed, r])``, so the result does not
    depend on ``threads``.
    """
    x = np.asarray(points, dtype=float)
    if x.ndim != 2:
        raise DataError("points must be a 2-D array")
    n = x.shape[0]
    if k < 1:
        raise ConfigError("k must be >= 1")
    if k > n:
        raise ConfigError(f"k={k} exceeds the number of points ({n})")
    restarts = max(1, int(restarts))

    def one(r):
        return _lloyd(x, k, np.random.default_rng([seed, r]))

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            runs = list(pool.map(one, range(restarts)))
    else:
        runs = [one(r) for r in range(restarts)]
    best = min(range(restarts), key=lambda r: (runs[r][2], r))
    c, labels, inertia, iters, history = runs[best]
    return KMeansModel(k, c, labels, inertia, seed, restarts, iters, best, history)


def silhouette(points, assignments) -> float:
    """Mean silhouette over all points (full pairwise distances)."""
    x = np.asarray(points, dtype=float)
    labels = np.asarray(assignments)
    ids, labels = np.unique(labels, return_inverse=True)
    k = ids.size
    if k < 2:
        raise DataError("silhouette needs at least two clusters")
    n = x.shape[0]
    sizes = np.bincount(labels, minlength=k).astype(float)
    onehot = np.zeros((n, k))
    onehot[np.arange(n), labels] = 1.0
    sums = np.zeros((n, k))
    step = max(1, 4_000_000 // max(1, n * x.shape[1]))
    for lo in range(0, n, step):
        blk = slice(lo, min(n, lo + step))
        dist = np.sqrt(((x[blk, None, :] - x[None, :, :]) ** 2).sum(axis=2))
        sums[blk] = dist @ onehot
    own = sizes[labels]
    a = np.where(own > 1, sums[np.arange(n), labels] / np.maximum(own - 1, 1), 0.0)
    mean_other = sums / sizes
    mean_other[np.arange(n), labels] = np.inf
    b = mean_other.min(axis=1)
    denom = np.maximum(a, b)
    with np.errstate(invalid="ignore", divide="ignore"):
        s = np.where(denom > 0, (b - a) / denom, 0.0)
    s[own == 1] = 0.0
    return float(s.mean())


def sweep_k(points, k_range: Sequence[int], seed: int, restarts: int = 10, threads: int = 1) -> pd.DataFrame:
    """Silhouette and within-cluster scatter per k, with advisory flags."""
    x = np.asarray(points, dtype=float)
    ks = sorted(set(int(k) for k in k_range))
    if not ks:
        raise ConfigError("empty k range")
    if ks[0] < 2 or ks[-1] > x.shape[0]:
        raise ConfigError(f"k range {ks[0]}..{ks[-1]} must lie within [2, {x.shape[0]}]")
    rows = []
    for k in ks:
        model = fit_kmeans(x, k, seed, restarts, threads)
        rows.append({"k": k, "silhouette": silhouette(x, model.assignments), "ws": model.inertia})
    table = pd.DataFrame(rows)
    table["flags"] = flag_sweep(table)
    return table


def flag_sweep(table: pd.DataFrame) -> list[str]:
    sil = table["silhouette"].to_numpy()
    ws = table["ws"].to_numpy()
    n = len(sil)
    flags = [[] for _ in range(n)]
    if n:
        flags[int(sil.argmax())].append("silhouette_max")
    for i in range(n):
        left = sil[i - 1] if i > 0 else -np.inf
        right = sil[i + 1] if i < n - 1 else -np.inf
        if n > 1 and sil[i] > left and sil[i] > right:
            flags[i].append("silhouette_local_max")
    if n >= 3:
        second = ws[:-2] - 2 * ws[1:-1] + ws[2:]
        flags[int(second.argmax()) + 1].append("ws_elbow")
    return [";".join(f) for f in flags]


# -------------------------------------------------------------------- profiles


@dataclass
class ClusterProfile:
    cluster_id: int
    n_days: int
    concentration: float
    fraction_days: float
    avg_anomaly: float
    avg_sched_flights: float
    avg_cx_rate: float
    avg_arrd_per_flight: float
    typology: str = "Smooth"
    label: str = ""
    geo_tag: str = ""


PROFILE_COLUMNS = ["cluster_id", "type", "label", "concentration", "fraction_days", "avg_anomaly",
                   "avg_sched_flights", "avg_cx_rate", "avg_arrd_per_flight", "n_days"]


def profile_clusters(model: KMeansModel, points, nas: pd.DataFrame, scaled_scores) -> list[ClusterProfile]:
    """Per-cluster means of member days.

    ``nas`` holds one row per day (aligned with ``points``) with
    ``scheduled``, ``cx_rate`` (fraction) and ``arrd_per_flight``.
    """
    x = np.asarray(points, dtype=float)
    scores = np.asarray(scaled_scores, dtype=float)
    if not len(nas) == len(scores) == x.shape[0]:
        raise DataError("profile inputs are not aligned day-for-day")
    dist = model.distances(x)
    n = x.shape[0]
    out = []
    for j in range(model.k):
        m = model.assignments == j
        cnt = int(m.sum())
        if cnt == 0:
            continue
        out.append(ClusterProfile(
            cluster_id=j, n_days=cnt,
            concentration=float(dist[m].mean()),
            fraction_days=100.0 * cnt / n,
            avg_anomaly=float(scores[m].mean()),
            avg_sched_flights=float(nas["scheduled"].to_numpy()[m].mean()),
            avg_cx_rate=100.0 * float(nas["cx_rate"].to_numpy()[m].mean()),
            avg_arrd_per_flight=float(nas["arrd_per_flight"].to_numpy()[m].mean()),
        ))
    return out


@dataclass(frozen=True)
class TypologyThresholds:
    """Heuristic cut-offs; rates in percent, delays in minutes."""

    nas_cx: float = 15.0
    nas_cx_with_delay: float = 10.0
    nas_arrd: float = 35.0
    disruption_anomaly: float = 0.25
    disturbance_anomaly: float = 0.18


def typology_of(p: ClusterProfile, t: TypologyThresholds) -> str:
    if p.avg_cx_rate >= t.nas_cx or (p.avg_cx_rate >= t.nas_cx_with_delay and p.avg_arrd_per_flight >= t.nas_arrd):
        return "NASDisruption"
    if p.avg_anomaly >= t.disruption_anomaly:
        return "RegionalDisruption"
    if p.avg_anomaly >= t.disturbance_anomaly:
        return "RegionalDisturbance"
    return "Smooth"


def longitude_band(lon: float) -> str:
    if lon < -100.0:
        return "West"
    if lon < -85.0:
        return "Central"
    return "East"


def geographic_tags(model: KMeansModel, z: np.ndarray, columns: Sequence, group_lon: dict) -> dict:
    """Tag each cluster by where its members perform worst.

    The per-group severity is the member-mean of standardized CX plus ArrD.
    A cluster bad almost everywhere is tagged ``NAS``; otherwise the
    longitude band of the worst group.
    """
    z = np.asarray(z, dtype=float)
    gids = sorted({g for g, _ in columns}, key=lambda g: (group_lon.get(g, 0.0), g))
    pick = {g: [j for j, (gg, m) in enumerate(columns) if gg == g and m in ("CX", "ArrD")] for g in gids}
    tags = {}
    for j in range(model.k):
        m = model.assignments == j
        if not m.any():
            continue
        mean = z[m].mean(axis=0)
        sev = np.array([mean[pick[g]].sum() for g in gids])
        if (sev > 0).mean() >= 0.9:
            tags[j] = "NAS"
        else:
            tags[j] = longitude_band(group_lon.get(gids[int(sev.argmax())], 0.0))
    return tags


def classify_typology(profiles: Sequence[ClusterProfile], thresholds: Optional[TypologyThresholds] = None,
                      tags: Optional[dict] = None) -> list[ClusterProfile]:
    t = thresholds or TypologyThresholds()
    tags = tags or {}
    out, seen = [], {}
    for p in profiles:
        typ = typology_of(p, t)
        tag = tags.get(p.cluster_id, "")
        base = " ".join(x for x in (tag, _TYPOLOGY_WORDS[typ]) if x)
        seen[base] = seen.get(base, 0) + 1
        label = base if seen[base] == 1 else f"{base} {seen[base]}"
        out.append(replace(p, typology=typ, label=label, geo_tag=tag))
    return out


def profiles_frame(profiles: Sequence[ClusterProfile]) -> pd.DataFrame:
    return pd.DataFrame([{
        "cluster_id": p.cluster_id, "type": p.typology, "label": p.label,
        "concentration": p.concentration, "fraction_days": p.fraction_days,
        "avg_anomaly": p.avg_anomaly, "avg_sched_flights": p.avg_sched_flights,
        "avg_cx_rate": p.avg_cx_rate, "avg_arrd_per_flight": p.avg_arrd_per_flight,
        "n_days": p.n_days,
    } for p in profiles], columns=PROFILE_COLUMNS)
