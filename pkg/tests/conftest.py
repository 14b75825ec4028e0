import numpy as np
import pytest

from cityhier.cities import City, CitySet
from cityhier.geo import DistanceMatrix


def make_city_set(populations, coords_km=None):
    """City set from raw populations (any order) with optional planar
    coordinates in km; distances become Euclidean meters."""
    populations = list(populations)
    n = len(populations)
    if coords_km is None:
        coords_km = [(float(i), 0.0) for i in range(n)]
    order = sorted(range(n), key=lambda i: (-populations[i], i))
    cities = tuple(
        City(
            id=new_id,
            population=float(populations[site]),
            center_cell=(0, site),
            center_lat=0.0,
            center_lon=0.0,
            n_cells=1,
        )
        for new_id, site in enumerate(order)
    )
    pts = np.array([coords_km[site] for site in order], dtype=float)
    delta = pts[:, None, :] - pts[None, :, :]
    values = np.sqrt((delta**2).sum(axis=2)) * 1000.0
    np.fill_diagonal(values, 0.0)
    return CitySet(cities=cities, meta={}), DistanceMatrix(values, provider="loaded")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
