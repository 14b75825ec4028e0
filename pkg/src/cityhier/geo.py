"""Inter-city distances: great-circle, road-network shortest paths, matrices."""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, NamedTuple, Optional

import numpy as np

from .errors import (
    ArgumentError,
    DataError,
    DomainError,
    MissingReferenceError,
    SnapError,
)

if TYPE_CHECKING:
    from .cities import CitySet
    from .ingest import RoadNetwork

EARTH_RADIUS_M = 6_371_008.8


def _check_latlon(lat: float, lon: float) -> None:
    if not (-90.0 <= lat <= 90.0):
        raise DomainError(f"latitude {lat} outside [-90, 90]")
    if not (-180.0 <= lon <= 180.0):
        raise DomainError(f"longitude {lon} outside [-180, 180]")


def great_circle_m(a: tuple[float, float], b: tuple[float, float]) -> float:
    """Haversine distance in meters between (lat, lon) points, R = 6371.0088 km."""
    _check_latlon(*a)
    _check_latlon(*b)
    if a == b:
        return 0.0
    phi1, lam1 = math.radians(a[0]), math.radians(a[1])
    phi2, lam2 = math.radians(b[0]), math.radians(b[1])
    s = (
        math.sin((phi2 - phi1) / 2.0) ** 2
        + math.cos(phi1) * math.cos(phi2) * math.sin((lam2 - lam1) / 2.0) ** 2
    )
    return 2.0 * EARTH_RADIUS_M * math.asin(min(1.0, math.sqrt(s)))


def _haversine_to_many(lat: float, lon: float, lats: np.ndarray, lons: np.ndarray) -> np.ndarray:
    """Vectorized haversine from one point to arrays of points, meters."""
    phi1 = math.radians(lat)
    phi2 = np.radians(lats)
    dphi = phi2 - phi1
    dlam = np.radians(lons) - math.radians(lon)
    s = np.sin(dphi / 2.0) ** 2 + math.cos(phi1) * np.cos(phi2) * np.sin(dlam / 2.0) ** 2
    return 2.0 * EARTH_RADIUS_M * np.arcsin(np.minimum(1.0, np.sqrt(s)))


@dataclass(frozen=True, eq=False)
class DistanceMatrix:
    """Pairwise inter-city distances in meters, row = origin city.

    The diagonal is exactly zero; +inf marks unreachable pairs. Asymmetry is
    permitted (one-way roads make driving distances direction-dependent).
    """

    values: np.ndarray
    provider: str = "loaded"  # "road" | "great-circle" | "loaded"

    def __post_init__(self):
        v = self.values
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise DataError(f"distance matrix must be square, got shape {v.shape}")
        if np.isnan(v).any():
            raise DataError("distance matrix contains NaN")
        diag = np.diagonal(v)
        if np.any(diag != 0.0):
            i = int(np.nonzero(diag != 0.0)[0][0])
            raise DataError(f"nonzero diagonal entry d({i},{i}) = {diag[i]}")
        finite = v[np.isfinite(v)]
        if finite.size and finite.min() < 0.0:
            raise DataError("negative distance entry")

    @property
    def n(self) -> int:
        return self.values.shape[0]


class SnapRecord(NamedTuple):
    city_id: int
    node_id: str
    snap_m: float


def shortest_path_from(network: "RoadNetwork", source: str) -> dict[str, float]:
    """Dijkstra distances in meters from `source` to every node (+inf if unreachable)."""
    adjacency = network.adjacency
    if source not in network.node_index:
        raise MissingReferenceError(f"unknown source node {source!r}")
    dist = {nid: math.inf for nid, _, _ in network.nodes}
    dist[source] = 0.0
    heap: list[tuple[float, str]] = [(0.0, source)]
    done: set[str] = set()
    while heap:
        d, u = heapq.heappop(heap)
        if u in done:
            continue
        done.add(u)
        for v, w in adjacency.get(u, ()):
            nd = d + w
            if nd < dist[v]:
                dist[v] = nd
                heapq.heappush(heap, (nd, v))
    return dist


def snap_cities(
    cities: "CitySet", network: "RoadNetwork", snap_radius_km: float = 20.0
) -> list[SnapRecord]:
    """Nearest network node per city center (great-circle).

    Raises SnapError listing every city farther than `snap_radius_km` from
    any node; the report is emitted on success for audit.
    """
    if snap_radius_km <= 0:
        raise ArgumentError("snap_radius_km must be positive")
    if not network.nodes:
        raise SnapError("road network has no nodes")
    node_ids = [nid for nid, _, _ in network.nodes]
    lats = np.array([lat for _, lat, _ in network.nodes])
    lons = np.array([lon for _, _, lon in network.nodes])
    records = []
    offenders = []
    limit_m = snap_radius_km * 1000.0
    for city in cities:
        d = _haversine_to_many(city.center_lat, city.center_lon, lats, lons)
        j = int(np.argmin(d))
        snap_m = float(d[j])
        if snap_m > limit_m:
            offenders.append((city.id, snap_m))
        records.append(SnapRecord(city.id, node_ids[j], snap_m))
    if offenders:
        detail = ", ".join(f"city {cid} ({m/1000.0:.1f} km)" for cid, m in offenders)
        raise SnapError(
            f"{len(offenders)} cities farther than {snap_radius_km} km from any road node: {detail}"
        )
    return records


def build_distance_matrix(
    cities: "CitySet",
    network: Optional["RoadNetwork"] = None,
    snap_radius_km: float = 20.0,
) -> DistanceMatrix:
    """All-pairs city distance matrix.

    With a network: entry (i, j) is the shortest road path from city i's
    snapped node to city j's. Without: great-circle between city centers.
    """
    n = len(cities)
    if network is None:
        lats = np.array([c.center_lat for c in cities])
        lons = np.array([c.center_lon for c in cities])
        values = np.empty((n, n))
        for i in range(n):
            values[i] = _haversine_to_many(lats[i], lons[i], lats, lons)
        np.fill_diagonal(values, 0.0)
        return DistanceMatrix(values, provider="great-circle")

    records = snap_cities(cities, network, snap_radius_km)
    nodes = [r.node_id for r in records]
    values = np.empty((n, n))
    for i, src in enumerate(nodes):
        dist = shortest_path_from(network, src)
        values[i] = [dist[nd] for nd in nodes]
    np.fill_diagonal(values, 0.0)
    return DistanceMatrix(values, provider="road")
