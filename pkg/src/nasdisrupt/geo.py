"""Airport registry and airport-group construction.

Airports are grouped per ARTCC: a centre with at most one large hub forms a
single group; a centre with several large hubs is split into one group per
hub, every other airport joining its nearest hub by great-circle distance.
"""
from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import pandas as pd

from .errors import DataError

EARTH_RADIUS_KM = 6371.0


@dataclass(frozen=True)
class Airport:
    code: str
    artcc: str
    lat: float
    lon: float
    large_hub: bool = False

    def __post_init__(self):
        if not -90.0 <= self.lat <= 90.0:
            raise DataError(f"airport {self.code}: latitude {self.lat} out of range")
        if not -180.0 <= self.lon <= 180.0:
            raise DataError(f"airport {self.code}: longitude {self.lon} out of range")
        if not self.artcc:
            raise DataError(f"airport {self.code}: missing ARTCC")


@dataclass(frozen=True)
class AirportGroup:
    group_id: str
    members: frozenset
    anchor_hub: Optional[str]
    centroid_lon: float
    centroid_lat: float
    artcc: str = ""


def haversine(a, b) -> float:
    """Great-circle distance in km between two ``(lat, lon)`` pairs in degrees."""
    lat1, lon1 = map(math.radians, a)
    lat2, lon2 = map(math.radians, b)
    h = (math.sin((lat2 - lat1) / 2) ** 2
         + math.cos(lat1) * math.cos(lat2) * math.sin((lon2 - lon1) / 2) ** 2)
    return 2 * EARTH_RADIUS_KM * math.asin(min(1.0, math.sqrt(h)))


def _make_group(group_id, airports, anchor, artcc) -> AirportGroup:
    return AirportGroup(
        group_id=group_id,
        members=frozenset(a.code for a in airports),
        anchor_hub=anchor,
        centroid_lon=math.fsum(a.lon for a in airports) / len(airports),
        centroid_lat=math.fsum(a.lat for a in airports) / len(airports),
        artcc=artcc,
    )


def nearest_hub(airport: Airport, hubs: Sequence[Airport]) -> Airport:
    # distance ties go to the lexicographically smaller hub code
    return min(hubs, key=lambda h: (haversine((airport.lat, airport.lon), (h.lat, h.lon)), h.code))


def group_airports(registry: Iterable[Airport]) -> list[AirportGroup]:
    """Partition the registry into airport groups, sorted by group id."""
    airports = sorted(registry, key=lambda a: a.code)
    seen = set()
    by_artcc = defaultdict(list)
    for a in airports:
        if a.code in seen:
            raise DataError(f"duplicate airport code {a.code}")
        seen.add(a.code)
        by_artcc[a.artcc].append(a)

    groups = []
    for artcc in sorted(by_artcc):
        members = by_artcc[artcc]
        hubs = [a for a in members if a.large_hub]
        if len(hubs) <= 1:
            anchor = hubs[0].code if hubs else None
            groups.append(_make_group(anchor or artcc, members, anchor, artcc))
            continue
        assigned = {h.code: [h] for h in hubs}
        for a in members:
            if not a.large_hub:
                assigned[nearest_hub(a, hubs).code].append(a)
        for h in hubs:
            groups.append(_make_group(h.code, assigned[h.code], h.code, artcc))

    ids = [g.group_id for g in groups]
    if len(set(ids)) != len(ids):
        raise DataError("group ids collide (an ARTCC code equals a hub code)")
    return sorted(groups, key=lambda g: g.group_id)


def order_groups_by_longitude(groups: Sequence[AirportGroup]) -> list[str]:
    """Group ids west to east; equal centroids fall back to id order."""
    return [g.group_id for g in sorted(groups, key=lambda g: (g.centroid_lon, g.group_id))]


def membership(groups: Sequence[AirportGroup]) -> dict[str, str]:
    return {code: g.group_id for g in groups for code in g.members}


def read_airports(path) -> list[Airport]:
    frame = pd.read_csv(path, dtype=str, keep_default_na=False)
    needed = ["code", "artcc", "lat", "lon", "large_hub"]
    missing = [c for c in needed if c not in frame.columns]
    if missing:
        raise DataError(f"{path}: missing columns {missing}")
    out = []
    for i, row in enumerate(frame.itertuples(index=False), start=1):
        try:
            lat, lon = float(row.lat), float(row.lon)
        except ValueError:
            raise DataError(f"{path}: row {i}: bad coordinates") from None
        if row.large_hub not in ("0", "1"):
            raise DataError(f"{path}: row {i}, column large_hub: expected 0 or 1")
        out.append(Airport(row.code, row.artcc, lat, lon, row.large_hub == "1"))
    return out


def groups_to_json(groups: Sequence[AirportGroup]) -> list[dict]:
    return [
        {"group_id": g.group_id, "artcc": g.artcc, "anchor_hub": g.anchor_hub,
         "members": sorted(g.members), "centroid_lat": g.centroid_lat, "centroid_lon": g.centroid_lon}
        for g in groups
    ]


def groups_from_json(items) -> list[AirportGroup]:
    return [AirportGroup(d["group_id"], frozenset(d["members"]), d["anchor_hub"],
                         d["centroid_lon"], d["centroid_lat"], d.get("artcc", ""))
            for d in items]
