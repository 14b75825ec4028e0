"""City extraction from population grids.

A city is a maximal connected cluster of grid cells whose population
density reaches `density_min` persons/km^2 and whose total population
reaches `pop_min`. Density uses the latitude-dependent spherical cell area,
not a nominal constant, because angular cells shrink toward the poles.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterator, Optional

import numpy as np

from .errors import ArgumentError, DataError, FormatError
from .ingest import PopulationGrid

EARTH_RADIUS_KM = 6371.0088

CITIES_CSV_HEADER = [
    "id",
    "center_lat",
    "center_lon",
    "population",
    "n_cells",
    "center_row",
    "center_col",
]


def cell_area_km2(grid: PopulationGrid, row: int) -> float:
    """Spherical area in km^2 of one cell in `row`: R^2 * dphi * dlam * cos(lat)."""
    lat = grid.row_center_lat(row)  # raises IndexError out of range
    dphi = math.radians(grid.cell_height_deg)
    dlam = math.radians(grid.cell_width_deg)
    return EARTH_RADIUS_KM**2 * dphi * dlam * math.cos(math.radians(lat))


@dataclass(frozen=True, eq=True)
class City:
    """One extracted city. `center_cell` is the most densely populated member
    cell (ties broken by smallest (row, col)); `member_cells` is None for
    cities loaded from CSV, where only the cell count survives."""

    id: int
    population: float
    center_cell: tuple[int, int]
    center_lat: float
    center_lon: float
    n_cells: int
    member_cells: Optional[tuple[tuple[int, int], ...]] = None


def _order_key(city: City):
    # population descending, ties by smaller center row then col
    return (-city.population, city.center_cell[0], city.center_cell[1])


@dataclass(frozen=True, eq=False)
class CitySet:
    """Cities in a strictly enforced order: population descending, ties by
    smaller center (row, col). Ids equal list positions."""

    cities: tuple[City, ...]
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        for i, city in enumerate(self.cities):
            if city.id != i:
                raise DataError(f"city at position {i} has id {city.id}")
        for a, b in zip(self.cities, self.cities[1:]):
            if _order_key(a) > _order_key(b):
                raise DataError(
                    f"cities {a.id} and {b.id} violate the size-descending order"
                )

    def __len__(self) -> int:
        return len(self.cities)

    def __getitem__(self, i: int) -> City:
        return self.cities[i]

    def __iter__(self) -> Iterator[City]:
        return iter(self.cities)

    @cached_property
    def populations(self) -> np.ndarray:
        return np.array([c.population for c in self.cities])


def _neighbor_offsets(connectivity: int) -> list[tuple[int, int]]:
    if connectivity == 4:
        return [(0, 1), (1, 0)]
    if connectivity == 8:
        return [(0, 1), (1, 0), (1, 1), (1, -1)]
    raise ArgumentError(f"connectivity must be 4 or 8, got {connectivity}")


def label_components(mask: np.ndarray, connectivity: int = 4) -> tuple[np.ndarray, int]:
    """Connected-component labels of a boolean mask.

    Returns (labels, n_components); background cells get -1. Iterative
    union-find over neighbor pairs, no recursion.
    """
    offsets = _neighbor_offsets(connectivity)
    n_rows, n_cols = mask.shape
    flat = np.flatnonzero(mask.ravel())
    labels = np.full(mask.size, -1, dtype=np.int64)
    if flat.size == 0:
        return labels.reshape(mask.shape), 0
    compact = np.full(mask.size, -1, dtype=np.int64)
    compact[flat] = np.arange(flat.size)

    parent = list(range(flat.size))

    def find(i: int) -> int:
        root = i
        while parent[root] != root:
            root = parent[root]
        while parent[i] != root:
            parent[i], i = root, parent[i]
        return root

    for dr, dc in offsets:
        rs = slice(0, n_rows - dr)
        cs = slice(max(0, -dc), n_cols - max(0, dc))
        both = mask[rs, cs] & mask[dr:, slice(max(0, dc), n_cols - max(0, -dc))]
        r, c = np.nonzero(both)
        a = r * n_cols + (c + max(0, -dc))
        b = (r + dr) * n_cols + (c + max(0, -dc) + dc)
        for x, y in zip(compact[a], compact[b]):
            rx, ry = find(int(x)), find(int(y))
            if rx != ry:
                if rx < ry:
                    parent[ry] = rx
                else:
                    parent[rx] = ry

    roots = np.fromiter((find(i) for i in range(flat.size)), dtype=np.int64, count=flat.size)
    _, comp = np.unique(roots, return_inverse=True)
    labels[flat] = comp
    return labels.reshape(mask.shape), int(comp.max()) + 1


def extract_cities(
    grid: PopulationGrid,
    density_min: float = 1000.0,
    pop_min: float = 10000.0,
    connectivity: int = 4,
) -> CitySet:
    """Extract cities: maximal connected clusters of cells with density >=
    `density_min` persons/km^2 totalling at least `pop_min` persons.

    NODATA cells count as population 0. Deterministic: identical inputs give
    identical output including ordering and ids.
    """
    if density_min <= 0:
        raise ArgumentError("density_min must be positive")
    if pop_min <= 0:
        raise ArgumentError("pop_min must be positive")

    areas = np.array([cell_area_km2(grid, r) for r in range(grid.n_rows)])
    qualifies = grid.counts >= density_min * areas[:, None]
    labels, n_comp = label_components(qualifies, connectivity)

    cities: list[City] = []
    if n_comp:
        flat = np.flatnonzero(qualifies.ravel())
        comp = labels.ravel()[flat]
        counts = grid.counts.ravel()[flat]
        rows = flat // grid.n_cols
        cols = flat % grid.n_cols
        densities = counts / areas[rows]

        pops = np.bincount(comp, weights=counts, minlength=n_comp)
        # center = max density, ties by smallest (row, col) i.e. smallest flat index
        order = np.lexsort((flat, -densities, comp))
        first = np.searchsorted(comp[order], np.arange(n_comp))
        center_flat = flat[order[first]]

        grouped = np.argsort(comp, kind="stable")
        bounds = np.searchsorted(comp[grouped], np.arange(n_comp + 1))
        for k in range(n_comp):
            if pops[k] < pop_min:
                continue
            members_idx = grouped[bounds[k] : bounds[k + 1]]
            members = tuple(
                (int(r), int(c)) for r, c in zip(rows[members_idx], cols[members_idx])
            )
            crow = int(center_flat[k] // grid.n_cols)
            ccol = int(center_flat[k] % grid.n_cols)
            lat, lon = grid.cell_center(crow, ccol)
            cities.append(
                City(
                    id=-1,
                    population=float(pops[k]),
                    center_cell=(crow, ccol),
                    center_lat=lat,
                    center_lon=lon,
                    n_cells=len(members),
                    member_cells=members,
                )
            )

    cities.sort(key=_order_key)
    final = tuple(
        City(
            id=i,
            population=c.population,
            center_cell=c.center_cell,
            center_lat=c.center_lat,
            center_lon=c.center_lon,
            n_cells=c.n_cells,
            member_cells=c.member_cells,
        )
        for i, c in enumerate(cities)
    )
    meta = {
        "density_min": density_min,
        "pop_min": pop_min,
        "connectivity": connectivity,
        "grid": {
            "n_rows": grid.n_rows,
            "n_cols": grid.n_cols,
            "origin_lat": grid.origin_lat,
            "origin_lon": grid.origin_lon,
            "cell_height_arcsec": grid.cell_height_arcsec,
            "cell_width_arcsec": grid.cell_width_arcsec,
        },
    }
    return CitySet(cities=final, meta=meta)


def save_cities_csv(cities: CitySet, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CITIES_CSV_HEADER)
        for c in cities:
            writer.writerow(
                [
                    c.id,
                    repr(c.center_lat),
                    repr(c.center_lon),
                    repr(c.population),
                    c.n_cells,
                    c.center_cell[0],
                    c.center_cell[1],
                ]
            )


def load_cities_csv(path) -> CitySet:
    path = Path(path)
    cities = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != CITIES_CSV_HEADER:
            raise FormatError(f"{path} header must be {','.join(CITIES_CSV_HEADER)}")
        for i, row in enumerate(reader):
            if len(row) != len(CITIES_CSV_HEADER):
                raise FormatError(f"{path} row {i + 1} has {len(row)} fields")
            try:
                cities.append(
                    City(
                        id=int(row[0]),
                        center_lat=float(row[1]),
                        center_lon=float(row[2]),
                        population=float(row[3]),
                        n_cells=int(row[4]),
                        center_cell=(int(row[5]), int(row[6])),
                    )
                )
            except ValueError as exc:
                raise FormatError(f"{path} row {i + 1}: {exc}") from None
    return CitySet(cities=tuple(cities), meta={"source": str(path)})
