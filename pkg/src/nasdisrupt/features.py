"""Per-flight delays, per-day airport-group metrics and the day feature matrix.

Averages divide by scheduled counts: a cancelled flight adds zero minutes but
still counts in the arrival or departure denominator.
"""
from __future__ import annotations

import datetime as dt
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np
import pandas as pd

from .corpus import FlightRecord, day_column, day_of
from .errors import DataError
from .geo import AirportGroup, membership

METRICS = ("CX", "ArrD", "DD", "AirD")
_METRIC_FIELD = {"CX": "cx", "ArrD": "arrd_avg", "DD": "dd_avg", "AirD": "aird_avg"}
FEATURE_COLUMNS = ["day", "group_id", "a", "d", "ca", "cd", "cx", "dd_avg", "arrd_avg", "aird_avg"]
CONSTANT_STD = 1e-12


@dataclass(frozen=True)
class FlightDelays:
    dd: float
    arrd: float
    aird: Optional[float]


@dataclass(frozen=True)
class DailyGroupMetrics:
    a: int
    d: int
    ca: int
    cd: int
    cx: float
    dd_avg: float
    arrd_avg: float
    aird_avg: float


def _minutes(delta: dt.timedelta) -> float:
    return delta.total_seconds() / 60.0


def flight_delays(record: FlightRecord) -> FlightDelays:
    if record.cancelled:
        raise DataError("delays undefined for cancellations")
    dd = max(0.0, _minutes(record.actual_dep - record.sched_dep))
    arrd = max(0.0, _minutes(record.actual_arr - record.sched_arr))
    aird = None
    if record.wheels_off and record.wheels_on and record.plan_airborne_min is not None:
        aird = max(0.0, _minutes(record.wheels_on - record.wheels_off) - record.plan_airborne_min)
    return FlightDelays(dd, arrd, aird)


def aggregate_day_group(flights: Iterable[FlightRecord], group: AirportGroup, day: dt.date) -> DailyGroupMetrics:
    """Daily metrics for one group from records already belonging to ``day``."""
    a = d = ca = cd = 0
    dd_sum = arrd_sum = aird_sum = 0.0
    for f in flights:
        if day_of(f) != day:
            continue
        arriving = f.destination in group.members
        departing = f.origin in group.members
        if not (arriving or departing):
            continue
        delays = None if f.cancelled else flight_delays(f)
        if departing:
            d += 1
            cd += f.cancelled
            if delays:
                dd_sum += delays.dd
        if arriving:
            a += 1
            ca += f.cancelled
            if delays:
                arrd_sum += delays.arrd
                aird_sum += delays.aird or 0.0
    if a + d == 0:
        return DailyGroupMetrics(0, 0, 0, 0, 0.0, 0.0, 0.0, 0.0)
    return DailyGroupMetrics(
        a, d, ca, cd,
        cx=(ca + cd) / (a + d),
        dd_avg=dd_sum / d if d else 0.0,
        arrd_avg=arrd_sum / a if a else 0.0,
        aird_avg=aird_sum / a if a else 0.0,
    )


# ------------------------------------------------------------------ columnar path


def _frame_minutes(values: pd.Series) -> np.ndarray:
    raw = values.to_numpy().astype("datetime64[m]").astype(np.int64).astype(float)
    raw[values.isna().to_numpy()] = np.nan
    return raw


def delay_columns(frame: pd.DataFrame) -> pd.DataFrame:
    """Vectorised per-flight delays in minutes; NaN for cancelled or absent terms."""
    sd, sa = _frame_minutes(frame["sched_dep"]), _frame_minutes(frame["sched_arr"])
    ad, aa = _frame_minutes(frame["actual_dep"]), _frame_minutes(frame["actual_arr"])
    off, on = _frame_minutes(frame["wheels_off"]), _frame_minutes(frame["wheels_on"])
    plan = frame["plan_airborne_min"].to_numpy(dtype=float)
    with np.errstate(invalid="ignore"):
        dd = np.maximum(0.0, ad - sd)
        arrd = np.maximum(0.0, aa - sa)
        aird = np.maximum(0.0, (on - off) - plan)
    # np.maximum propagates NaN, so absent inputs stay absent
    return pd.DataFrame({"dd": dd, "arrd": arrd, "aird": aird}, index=frame.index)


def _index_days(frame: pd.DataFrame, days: Sequence[dt.date]) -> np.ndarray:
    lookup = pd.Index(pd.to_datetime(list(days)))
    return lookup.get_indexer(day_column(frame))


def aggregate_table(frame: pd.DataFrame, groups: Sequence[AirportGroup], days: Sequence[dt.date],
                    group_order: Optional[Sequence[str]] = None) -> pd.DataFrame:
    """Metrics for every (day, group) cell, day-major in ``group_order``.

    Flights outside ``days`` are ignored; endpoints outside the registry
    contribute to no group.
    """
    order = list(group_order) if group_order is not None else [g.group_id for g in groups]
    col = {gid: i for i, gid in enumerate(order)}
    member = membership(groups)
    G, D = len(order), len(days)
    day_idx = _index_days(frame, days)
    og = np.array([col.get(member.get(c, ""), -1) for c in frame["origin"]], dtype=np.int64)
    dg = np.array([col.get(member.get(c, ""), -1) for c in frame["dest"]], dtype=np.int64)
    delays = delay_columns(frame)
    cancelled = frame["cancelled"].to_numpy(dtype=bool)

    def tally(gidx, weights):
        ok = (day_idx >= 0) & (gidx >= 0)
        cell = day_idx[ok] * G + gidx[ok]
        return np.bincount(cell, weights=weights[ok], minlength=D * G).reshape(D, G)

    ones = np.ones(len(frame))
    d = tally(og, ones)
    a = tally(dg, ones)
    cd = tally(og, cancelled.astype(float))
    ca = tally(dg, cancelled.astype(float))
    dd_sum = tally(og, np.nan_to_num(delays["dd"].to_numpy(), nan=0.0))
    arrd_sum = tally(dg, np.nan_to_num(delays["arrd"].to_numpy(), nan=0.0))
    aird_sum = tally(dg, np.nan_to_num(delays["aird"].to_numpy(), nan=0.0))

    with np.errstate(invalid="ignore", divide="ignore"):
        cx = np.where(a + d > 0, (ca + cd) / (a + d), 0.0)
        dd_avg = np.where(d > 0, dd_sum / d, 0.0)
        arrd_avg = np.where(a > 0, arrd_sum / a, 0.0)
        aird_avg = np.where(a > 0, aird_sum / a, 0.0)

    day_text = [x.isoformat() for x in days]
    return pd.DataFrame({
        "day": np.repeat(day_text, G),
        "group_id": np.tile(order, D),
        "a": a.ravel().astype(np.int64), "d": d.ravel().astype(np.int64),
        "ca": ca.ravel().astype(np.int64), "cd": cd.ravel().astype(np.int64),
        "cx": cx.ravel(), "dd_avg": dd_avg.ravel(),
        "arrd_avg": arrd_avg.ravel(), "aird_avg": aird_avg.ravel(),
    })


def nas_daily(frame: pd.DataFrame, days: Sequence[dt.date]) -> pd.DataFrame:
    """System-level daily totals: each flight counted once."""
    D = len(days)
    day_idx = _index_days(frame, days)
    ok = day_idx >= 0
    delays = delay_columns(frame)
    cancelled = frame["cancelled"].to_numpy(dtype=bool)

    def total(values):
        return np.bincount(day_idx[ok], weights=np.nan_to_num(values, nan=0.0)[ok], minlength=D)

    sched = total(np.ones(len(frame)))
    cxs = total(cancelled.astype(float))
    arr = total(delays["arrd"].to_numpy())
    with np.errstate(invalid="ignore", divide="ignore"):
        cx_rate = np.where(sched > 0, cxs / sched, 0.0)
        arrd_pf = np.where(sched > 0, arr / sched, 0.0)
    return pd.DataFrame({
        "day": [x.isoformat() for x in days],
        "scheduled": sched.astype(np.int64),
        "cancelled": cxs.astype(np.int64),
        "cx_rate": cx_rate,
        "arr_delay_min": arr,
        "dep_delay_min": total(delays["dd"].to_numpy()),
        "air_delay_min": total(delays["aird"].to_numpy()),
        "arrd_per_flight": arrd_pf,
        "no_flights": sched == 0,
    })


# ------------------------------------------------------------------------ matrix


@dataclass
class DayFeatureMatrix:
    days: list
    columns: list  # (group_id, metric) pairs
    values: np.ndarray
    col_mean: Optional[np.ndarray] = None
    col_std: Optional[np.ndarray] = None
    constant: Optional[np.ndarray] = None
    standardized: bool = False

    @property
    def labels(self) -> list[str]:
        return [f"{g}:{m}" for g, m in self.columns]

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame(self.values, columns=self.labels)
        frame.insert(0, "day", [str(d) for d in self.days])
        return frame

    def write_csv(self, path) -> None:
        self.to_frame().to_csv(path, index=False, lineterminator="\n")

    @classmethod
    def read_csv(cls, path) -> "DayFeatureMatrix":
        frame = pd.read_csv(path, dtype={"day": str}, float_precision="round_trip")
        cols = [tuple(c.rsplit(":", 1)) for c in frame.columns[1:]]
        return cls(list(frame["day"]), cols, frame.iloc[:, 1:].to_numpy(dtype=float))

    def stats_json(self) -> dict:
        return {
            "columns": self.labels,
            "mean": [float(x) for x in self.col_mean],
            "std": [float(x) for x in self.col_std],
            "constant": [bool(x) for x in self.constant],
        }


def build_matrix(days: Sequence, group_order: Sequence[str], metrics) -> DayFeatureMatrix:
    """Assemble the day x (group, metric) matrix from a long metrics table.

    ``metrics`` is a frame with ``FEATURE_COLUMNS`` (any row order) or a
    mapping ``{(day, group_id): DailyGroupMetrics}``. Missing cells are 0.
    """
    day_keys = [str(d) for d in days]
    row = {d: i for i, d in enumerate(day_keys)}
    gcol = {g: i for i, g in enumerate(group_order)}
    values = np.zeros((len(day_keys), 4 * len(group_order)))
    if isinstance(metrics, pd.DataFrame):
        items = ((r.day, r.group_id, r) for r in metrics.itertuples(index=False))
    else:
        items = ((str(k[0]), k[1], m) for k, m in metrics.items())
    for day, gid, m in items:
        if day not in row or gid not in gcol:
            continue
        base = 4 * gcol[gid]
        for j, metric in enumerate(METRICS):
            values[row[day], base + j] = getattr(m, _METRIC_FIELD[metric])
    columns = [(g, m) for g in group_order for m in METRICS]
    return DayFeatureMatrix(list(days), columns, values)


def standardize(matrix: DayFeatureMatrix) -> DayFeatureMatrix:
    """Column z-scores with population std; constant columns become zeros."""
    x = matrix.values
    n = x.shape[0]
    if n < 2:
        raise DataError("standardization needs at least two days")
    mean = x.sum(axis=0) / n
    centred = x - mean
    std = np.sqrt((centred ** 2).sum(axis=0) / n)
    constant = std < CONSTANT_STD
    safe = np.where(constant, 1.0, std)
    z = np.where(constant, 0.0, centred / safe)
    return DayFeatureMatrix(list(matrix.days), list(matrix.columns), z, mean, std, constant, True)
