"""Cluster / anomaly comparison tables, representative-day maps, trends and
cumulative metric shares.
"""
from __future__ import annotations

from typing import Iterable, Optional, Sequence
from xml.sax.saxutils import escape

import numpy as np
import pandas as pd

from .errors import DataError

# fixed linear encodings for day maps
MAP_CX_FULL = 0.5
MAP_ARRD_FULL = 120.0

SHARE_METRICS = ("days", "cancellations", "opsnet_delay", "arr_delay", "dep_delay", "air_delay")
_SHARE_SOURCE = {
    "cancellations": "cancelled", "opsnet_delay": "opsnet_delay_min",
    "arr_delay": "arr_delay_min", "dep_delay": "dep_delay_min", "air_delay": "air_delay_min",
}


def join_day_records(nas: pd.DataFrame, clusters: pd.DataFrame, anomaly: pd.DataFrame,
                     profiles: Optional[pd.DataFrame] = None, opsnet: Optional[pd.DataFrame] = None) -> pd.DataFrame:
    """One row per analysis day; raises unless every day has a cluster and a score."""
    out = nas.merge(clusters[["day", "cluster_id"]], on="day", how="left", validate="one_to_one")
    out = out.merge(anomaly[["day", "raw_score", "scaled_score"]], on="day", how="left", validate="one_to_one")
    if out["cluster_id"].isna().any() or out["scaled_score"].isna().any():
        raise DataError("cluster/anomaly join is not total over analysis days")
    if len(out) != len(clusters) or len(out) != len(anomaly):
        raise DataError("cluster or anomaly rows reference days outside the analysis calendar")
    out["cluster_id"] = out["cluster_id"].astype(int)
    if profiles is not None:
        types = profiles.set_index("cluster_id")
        out["typology"] = out["cluster_id"].map(types["type"])
        out["cluster_label"] = out["cluster_id"].map(types["label"])
    if opsnet is not None:
        out = out.merge(opsnet[["day", "opsnet_delay_min"]], on="day", how="left")
    return out


def score_cdf_by_cluster(records: pd.DataFrame) -> pd.DataFrame:
    order = np.lexsort((records["day"].to_numpy(), records["scaled_score"].to_numpy()))
    rows = records.iloc[order]
    n = len(rows)
    return pd.DataFrame({
        "day": rows["day"].to_numpy(),
        "scaled_score": rows["scaled_score"].to_numpy(),
        "cumulative_fraction": np.arange(1, n + 1) / n,
        "cluster_id": rows["cluster_id"].to_numpy(),
    })


def _quantile(sorted_vals: np.ndarray, q: float) -> float:
    # linear interpolation between order statistics
    pos = q * (len(sorted_vals) - 1)
    lo = int(np.floor(pos))
    hi = min(lo + 1, len(sorted_vals) - 1)
    return float(sorted_vals[lo] + (pos - lo) * (sorted_vals[hi] - sorted_vals[lo]))


def five_numbers(values) -> dict:
    v = np.sort(np.asarray(values, dtype=float))
    if v.size == 0:
        raise DataError("five-number summary of an empty set")
    q1, med, q3 = (_quantile(v, q) for q in (0.25, 0.5, 0.75))
    iqr = q3 - q1
    lo_fence, hi_fence = q1 - 1.5 * iqr, q3 + 1.5 * iqr
    outliers = v[(v < lo_fence) | (v > hi_fence)]
    return {"min": float(v[0]), "q1": q1, "median": med, "q3": q3, "max": float(v[-1]),
            "outliers": [float(x) for x in outliers]}


def boxplot_stats_by_cluster(records: pd.DataFrame) -> pd.DataFrame:
    """Five-number summaries per cluster, smoothest (lowest mean score) first."""
    rows = []
    for cid, grp in records.groupby("cluster_id", sort=True):
        s = five_numbers(grp["scaled_score"])
        rows.append({"cluster_id": int(cid), "n_days": len(grp), "mean": float(grp["scaled_score"].mean()),
                     **{k: s[k] for k in ("min", "q1", "median", "q3", "max")},
                     "n_outliers": len(s["outliers"]),
                     "outliers": ";".join(repr(x) for x in s["outliers"])})
    table = pd.DataFrame(rows)
    return table.sort_values(["mean", "cluster_id"], kind="stable").reset_index(drop=True)


def outliers_above(records: pd.DataFrame, quantile: float = 0.95) -> pd.DataFrame:
    """Days above the corpus quantile, with their cluster (the disagreement view)."""
    v = np.sort(records["scaled_score"].to_numpy())
    cut = _quantile(v, quantile)
    return records.loc[records["scaled_score"] > cut, ["day", "cluster_id", "scaled_score"]]


def day_map(day: str, features: pd.DataFrame, groups) -> pd.DataFrame:
    """Per-group circle encodings for one day: size from CX, colour from ArrD."""
    rows = features[features["day"] == str(day)]
    if rows.empty:
        raise DataError(f"no aggregates for day {day}")
    pos = {g.group_id: (g.centroid_lat, g.centroid_lon) for g in groups}
    rows = rows[rows["group_id"].isin(pos)]
    lat = [pos[g][0] for g in rows["group_id"]]
    lon = [pos[g][1] for g in rows["group_id"]]
    cx = rows["cx"].to_numpy(dtype=float)
    arrd = rows["arrd_avg"].to_numpy(dtype=float)
    return pd.DataFrame({
        "group_id": rows["group_id"].to_numpy(), "lat": lat, "lon": lon,
        "cx": cx, "arrd_avg": arrd,
        "size": np.clip(cx / MAP_CX_FULL, 0.0, 1.0),
        "color": np.clip(arrd / MAP_ARRD_FULL, 0.0, 1.0),
    })


def day_map_svg(table: pd.DataFrame, title: str = "", width: int = 800, height: int = 450) -> str:
    """Bare SVG scatter on a fixed CONUS-ish lon/lat frame."""
    lon0, lon1, lat0, lat1 = -130.0, -60.0, 20.0, 55.0

    def px(lon, lat):
        return ((lon - lon0) / (lon1 - lon0) * width, (lat1 - lat) / (lat1 - lat0) * height)

    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
             f'<rect width="{width}" height="{height}" fill="white"/>',
             f'<text x="10" y="20" font-size="14">{escape(title)}</text>']
    for r in table.itertuples(index=False):
        x, y = px(r.lon, r.lat)
        radius = 3 + 17 * r.size
        red = int(round(255 * r.color))
        parts.append(f'<circle cx="{x:.1f}" cy="{y:.1f}" r="{radius:.1f}" '
                     f'fill="rgb({red},{255 - red},80)" fill-opacity="0.7"><title>{escape(str(r.group_id))}</title></circle>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def trend_ratios(records: pd.DataFrame, disrupted: Iterable[int], by: str = "year") -> pd.DataFrame:
    """Share of days per bucket falling in the disrupted clusters.

    ``by="month"`` pools each calendar month across years.
    """
    if by not in ("year", "month"):
        raise ValueError("by must be 'year' or 'month'")
    disrupted = sorted(set(int(c) for c in disrupted))
    dates = pd.to_datetime(records["day"])
    bucket = dates.dt.year if by == "year" else dates.dt.month
    frame = pd.DataFrame({"bucket": bucket.to_numpy(), "cluster_id": records["cluster_id"].to_numpy()})
    rows = []
    for b, grp in frame.groupby("bucket", sort=True):
        n = len(grp)
        row = {by: int(b), "n_days": n,
               "ratio": float(grp["cluster_id"].isin(disrupted).sum() / n)}
        for c in disrupted:
            row[f"cluster_{c}"] = float((grp["cluster_id"] == c).sum() / n)
        rows.append(row)
    return pd.DataFrame(rows)


def cluster_order_by_anomaly(records: pd.DataFrame) -> list[int]:
    """Most anomalous cluster first."""
    means = records.groupby("cluster_id")["scaled_score"].mean()
    return [int(c) for c in sorted(means.index, key=lambda c: (-means[c], c))]


def cumulative_metric_shares(records: pd.DataFrame, cluster_order: Sequence[int]) -> pd.DataFrame:
    metrics = [m for m in SHARE_METRICS
               if m == "days" or (_SHARE_SOURCE[m] in records.columns and records[_SHARE_SOURCE[m]].notna().any())]
    per_day = {"days": np.ones(len(records))}
    for m in metrics[1:]:
        per_day[m] = records[_SHARE_SOURCE[m]].fillna(0.0).to_numpy(dtype=float)
    cid = records["cluster_id"].to_numpy()
    rows = []
    seen = np.zeros(len(records), dtype=bool)
    for c in cluster_order:
        mask = cid == c
        seen |= mask
        row = {"cluster_id": int(c)}
        for m in metrics:
            total = per_day[m].sum()
            # cumulative from the union mask so the final row is exactly 1
            row[f"{m}_share"] = float(per_day[m][mask].sum() / total) if total > 0 else 0.0
            row[f"{m}_cumulative"] = float(per_day[m][seen].sum() / total) if total > 0 else 0.0
        rows.append(row)
    return pd.DataFrame(rows)
