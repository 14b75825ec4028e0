import math
from collections import deque

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cityhier.cities import (
    cell_area_km2,
    extract_cities,
    load_cities_csv,
    save_cities_csv,
)
from cityhier.errors import ArgumentError, DataError
from cityhier.ingest import PopulationGrid

R_KM = 6371.0088


def make_grid(counts, origin_lat=0.0, cell_arcsec=30.0, origin_lon=0.0):
    counts = np.asarray(counts, dtype=float)
    return PopulationGrid(
        n_rows=counts.shape[0],
        n_cols=counts.shape[1],
        origin_lat=origin_lat,
        origin_lon=origin_lon,
        cell_height_arcsec=cell_arcsec,
        cell_width_arcsec=cell_arcsec,
        counts=counts,
    )


def flood_fill_components(mask, connectivity):
    """Independent BFS labeling oracle."""
    n_rows, n_cols = mask.shape
    if connectivity == 4:
        nbrs = [(-1, 0), (1, 0), (0, -1), (0, 1)]
    else:
        nbrs = [(dr, dc) for dr in (-1, 0, 1) for dc in (-1, 0, 1) if (dr, dc) != (0, 0)]
    seen = np.zeros_like(mask, dtype=bool)
    components = []
    for r in range(n_rows):
        for c in range(n_cols):
            if not mask[r, c] or seen[r, c]:
                continue
            comp = []
            queue = deque([(r, c)])
            seen[r, c] = True
            while queue:
                cr, cc = queue.popleft()
                comp.append((cr, cc))
                for dr, dc in nbrs:
                    nr, nc = cr + dr, cc + dc
                    if 0 <= nr < n_rows and 0 <= nc < n_cols and mask[nr, nc] and not seen[nr, nc]:
                        seen[nr, nc] = True
                        queue.append((nr, nc))
            components.append(sorted(comp))
    return components


def oracle_cities(grid, density_min, pop_min, connectivity):
    """Components and totals via the flood-fill oracle."""
    areas = np.array(
        [
            R_KM**2
            * math.radians(grid.cell_height_deg)
            * math.radians(grid.cell_width_deg)
            * math.cos(math.radians(grid.origin_lat + (grid.n_rows - r - 0.5) * grid.cell_height_deg))
            for r in range(grid.n_rows)
        ]
    )
    mask = grid.counts >= density_min * areas[:, None]
    comps = flood_fill_components(mask, connectivity)
    out = []
    for comp in comps:
        pop = sum(grid.counts[r, c] for r, c in comp)
        if pop >= pop_min:
            out.append((frozenset(comp), pop))
    return out


def test_equatorial_cell_area_matches_closed_form():
    # southern row (row 1) centered exactly on the equator
    grid = make_grid(np.zeros((2, 2)), origin_lat=-15.0 / 3600.0)
    assert grid.row_center_lat(1) == pytest.approx(0.0, abs=1e-15)
    expected = R_KM**2 * ((30.0 / 3600.0) * math.pi / 180.0) ** 2  # cos(0) = 1
    assert cell_area_km2(grid, 1) == pytest.approx(expected, rel=1e-12)


def test_cosine_latitude_factor():
    eq = make_grid(np.zeros((1, 1)), origin_lat=-(30.0 / 3600.0) / 2.0)
    hi = make_grid(np.zeros((1, 1)), origin_lat=60.0 - (30.0 / 3600.0) / 2.0)
    ratio = cell_area_km2(hi, 0) / cell_area_km2(eq, 0)
    assert ratio == pytest.approx(math.cos(math.radians(60.0)), rel=1e-12)


def test_near_pole_area_positive_and_tiny():
    grid = make_grid(np.zeros((1, 1)), origin_lat=89.999 - (30.0 / 3600.0) / 2.0)
    eq = make_grid(np.zeros((1, 1)), origin_lat=-(30.0 / 3600.0) / 2.0)
    a = cell_area_km2(grid, 0)
    assert 0.0 < a < 1e-3 * cell_area_km2(eq, 0)


def test_row_out_of_range():
    grid = make_grid(np.zeros((2, 2)))
    with pytest.raises(IndexError):
        cell_area_km2(grid, 2)


def test_all_below_density_yields_empty_set():
    grid = make_grid(np.full((10, 10), 100.0))  # ~116/km2 at the equator
    cs = extract_cities(grid)
    assert len(cs) == 0


def test_single_block_population_and_center():
    counts = np.zeros((9, 9))
    counts[2:7, 2:7] = 2000.0  # ~2300/km2 in ~0.86 km2 cells
    grid = make_grid(counts, origin_lat=0.0)
    cs = extract_cities(grid, density_min=1000.0, pop_min=10000.0)
    assert len(cs) == 1
    city = cs[0]
    assert city.population == 25 * 2000.0
    assert city.n_cells == 25
    # equal counts; densest cell is the one with the smallest area (highest
    # latitude = smallest row here), ties broken by smallest (row, col)
    assert city.center_cell == (2, 2)
    assert set(city.member_cells) == {(r, c) for r in range(2, 7) for c in range(2, 7)}


def test_threshold_below_pop_min_discards():
    counts = np.zeros((5, 5))
    counts[1, 1] = 5000.0  # dense but total < 10000
    grid = make_grid(counts)
    assert len(extract_cities(grid)) == 0
    assert len(extract_cities(grid, pop_min=5000.0)) == 1


@pytest.mark.parametrize("connectivity", [4, 8])
@pytest.mark.parametrize("pop_min", [10000.0, 20000.0])
def test_random_grid_matches_flood_fill_oracle(connectivity, pop_min, rng):
    counts = np.floor(rng.random((200, 200)) * 3000.0)
    counts[rng.random((200, 200)) < 0.55] = 0.0
    grid = make_grid(counts, origin_lat=40.0)
    expected = oracle_cities(grid, 1000.0, pop_min, connectivity)
    cs = extract_cities(grid, density_min=1000.0, pop_min=pop_min, connectivity=connectivity)
    got = {(frozenset(c.member_cells), c.population) for c in cs}
    assert got == {(cells, pop) for cells, pop in expected}
    assert len(cs) == len(expected)


def test_raising_pop_min_removes_exactly_mid_components(rng):
    counts = np.floor(rng.random((120, 120)) * 4000.0)
    counts[rng.random((120, 120)) < 0.6] = 0.0
    grid = make_grid(counts, origin_lat=-20.0)
    lo = extract_cities(grid, pop_min=10000.0)
    hi = extract_cities(grid, pop_min=20000.0)
    lo_comps = {frozenset(c.member_cells): c.population for c in lo}
    hi_comps = {frozenset(c.member_cells): c.population for c in hi}
    assert set(hi_comps) == {cells for cells, pop in lo_comps.items() if pop >= 20000.0}
    dropped = set(lo_comps) - set(hi_comps)
    assert all(10000.0 <= lo_comps[c] < 20000.0 for c in dropped)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10_000), connectivity=st.sampled_from([4, 8]))
def test_qualifying_cells_partitioned_and_maximal(seed, connectivity):
    r = np.random.default_rng(seed)
    counts = np.floor(r.random((25, 25)) * 3000.0)
    counts[r.random((25, 25)) < 0.5] = 0.0
    grid = make_grid(counts)
    cs = extract_cities(grid, pop_min=1.0, connectivity=connectivity)
    areas = np.array([cell_area_km2(grid, row) for row in range(25)])
    qualifying = {
        (r_, c_)
        for r_ in range(25)
        for c_ in range(25)
        if counts[r_, c_] >= 1000.0 * areas[r_]
    }
    seen = set()
    for city in cs:
        cells = set(city.member_cells)
        assert not (cells & seen)
        seen |= cells
    # pop_min=1 keeps every component, so the union covers all qualifying cells
    assert seen == qualifying
    # maximality: no qualifying neighbor outside its own city
    offsets = (
        [(-1, 0), (1, 0), (0, -1), (0, 1)]
        if connectivity == 4
        else [(a, b) for a in (-1, 0, 1) for b in (-1, 0, 1) if (a, b) != (0, 0)]
    )
    cell_owner = {cell: city.id for city in cs for cell in city.member_cells}
    for (r_, c_), owner in cell_owner.items():
        for dr, dc in offsets:
            nb = (r_ + dr, c_ + dc)
            if nb in qualifying:
                assert cell_owner[nb] == owner


def test_deterministic_and_ordered(rng):
    counts = np.floor(rng.random((60, 60)) * 5000.0)
    grid = make_grid(counts, origin_lat=10.0)
    a = extract_cities(grid)
    b = extract_cities(grid)
    assert [c.population for c in a] == [c.population for c in b]
    assert [c.center_cell for c in a] == [c.center_cell for c in b]
    pops = [c.population for c in a]
    assert pops == sorted(pops, reverse=True)
    assert [c.id for c in a] == list(range(len(a)))


def test_cities_csv_roundtrip(tmp_path, rng):
    counts = np.floor(rng.random((40, 40)) * 6000.0)
    grid = make_grid(counts, origin_lat=35.0)
    cs = extract_cities(grid)
    assert len(cs) > 0
    p = tmp_path / "cities.csv"
    save_cities_csv(cs, p)
    back = load_cities_csv(p)
    assert len(back) == len(cs)
    for a, b in zip(cs, back):
        assert a.id == b.id
        assert a.population == b.population
        assert a.center_cell == b.center_cell
        assert a.center_lat == b.center_lat and a.center_lon == b.center_lon
        assert a.n_cells == b.n_cells


def test_invalid_thresholds():
    grid = make_grid(np.zeros((2, 2)))
    with pytest.raises(ArgumentError):
        extract_cities(grid, density_min=0.0)
    with pytest.raises(ArgumentError):
        extract_cities(grid, pop_min=-1.0)
    with pytest.raises(ArgumentError):
        extract_cities(grid, connectivity=6)


def test_population_tie_breaks_by_center_cell(rng):
    counts = np.zeros((9, 9))
    counts[0, 0] = 20000.0
    counts[0, 5] = 20000.0  # same population, farther column
    grid = make_grid(counts)
    cs = extract_cities(grid)
    assert [c.center_cell for c in cs] == [(0, 0), (0, 5)]
