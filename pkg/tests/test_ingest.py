import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cityhier.errors import (
    CapacityError,
    DataError,
    FormatError,
    MissingReferenceError,
)
from cityhier.geo import DistanceMatrix
from cityhier.ingest import (
    PopulationGrid,
    RoadNetwork,
    load_distance_matrix,
    load_population_grid,
    load_road_network,
    save_distance_matrix,
    save_distance_matrix_csv,
    save_population_grid,
    save_road_network,
)


def write_ascii(path, text):
    path.write_text(text)
    return path


def test_zero_raster(tmp_path):
    p = write_ascii(
        tmp_path / "g.asc",
        "ncols 2\nnrows 2\nxllcorner 10.0\nyllcorner 45.0\ncellsize 0.008333333333333333\n0 0\n0 0\n",
    )
    grid = load_population_grid(p)
    assert grid.n_rows == 2 and grid.n_cols == 2
    assert np.all(grid.counts == 0.0)
    assert grid.origin_lat == 45.0 and grid.origin_lon == 10.0


def test_short_data_row_names_row(tmp_path):
    p = write_ascii(
        tmp_path / "g.asc",
        "ncols 3\nnrows 2\nxllcorner 0\nyllcorner 0\ncellsize 0.01\n1 2 3\n4 5\n",
    )
    with pytest.raises(FormatError, match="row 1"):
        load_population_grid(p)


def test_missing_header_field(tmp_path):
    p = write_ascii(tmp_path / "g.asc", "ncols 2\nxllcorner 0\nyllcorner 0\ncellsize 0.01\n1 1\n")
    with pytest.raises(FormatError, match="nrows"):
        load_population_grid(p)


def test_negative_count_names_cell(tmp_path):
    p = write_ascii(
        tmp_path / "g.asc",
        "ncols 2\nnrows 2\nxllcorner 0\nyllcorner 0\ncellsize 0.01\n1 1\n1 -4\n",
    )
    with pytest.raises(DataError, match="row 1, col 1"):
        load_population_grid(p)


def test_capacity_check_before_allocation(tmp_path):
    p = write_ascii(
        tmp_path / "g.asc",
        "ncols 1000000\nnrows 1000000\nxllcorner 0\nyllcorner 0\ncellsize 0.0000001\n",
    )
    with pytest.raises(CapacityError):
        load_population_grid(p)


def test_nodata_cells_become_zero(tmp_path):
    p = write_ascii(
        tmp_path / "g.asc",
        "ncols 2\nnrows 1\nxllcorner 0\nyllcorner 0\ncellsize 0.01\nNODATA_value -9999\n-9999 7\n",
    )
    grid = load_population_grid(p)
    assert grid.counts[0, 0] == 0.0 and grid.counts[0, 1] == 7.0
    assert grid.nodata == -9999
    assert grid.nodata_mask[0, 0] and not grid.nodata_mask[0, 1]


def test_crlf_and_lf_parse_identically(tmp_path):
    body = "ncols 2\nnrows 1\nxllcorner 0\nyllcorner 0\ncellsize 0.01\n1.5 2.25\n"
    a = load_population_grid(write_ascii(tmp_path / "lf.asc", body))
    b = load_population_grid(write_ascii(tmp_path / "crlf.asc", body.replace("\n", "\r\n")))
    assert np.array_equal(a.counts, b.counts)
    assert a.origin_lat == b.origin_lat


def test_packed_binary_roundtrip_bit_identical(tmp_path, rng):
    counts = np.floor(rng.random((100, 100)) * 5000.0)
    grid = PopulationGrid(
        n_rows=100,
        n_cols=100,
        origin_lat=-12.5,
        origin_lon=33.25,
        cell_height_arcsec=30.0,
        cell_width_arcsec=45.0,
        counts=counts,
    )
    p = tmp_path / "g.cpg"
    save_population_grid(grid, p, "packed-binary")
    back = load_population_grid(p, format="packed-binary")
    assert back.counts.tobytes() == counts.tobytes()
    assert back.cell_height_arcsec == 30.0 and back.cell_width_arcsec == 45.0
    assert back.origin_lat == -12.5 and back.origin_lon == 33.25


def test_packed_binary_auto_detect_and_nodata(tmp_path):
    counts = np.array([[1.0, 2.0], [3.0, 0.0]])
    mask = np.array([[False, False], [False, True]])
    grid = PopulationGrid(
        n_rows=2,
        n_cols=2,
        origin_lat=0.0,
        origin_lon=0.0,
        cell_height_arcsec=30.0,
        cell_width_arcsec=30.0,
        counts=counts,
        nodata=math.nan,
        nodata_mask=mask,
    )
    p = tmp_path / "g.cpg"
    save_population_grid(grid, p, "packed-binary")
    back = load_population_grid(p)  # auto sniffs magic
    assert np.array_equal(back.counts, counts)
    assert np.array_equal(back.nodata_mask, mask)


@settings(max_examples=25, deadline=None)
@given(
    n_rows=st.integers(1, 6),
    n_cols=st.integers(1, 6),
    square=st.booleans(),
    use_nodata=st.booleans(),
    data=st.data(),
)
def test_ascii_roundtrip_identity(tmp_path_factory, n_rows, n_cols, square, use_nodata, data):
    counts = np.array(
        data.draw(
            st.lists(
                st.lists(st.floats(0, 1e6), min_size=n_cols, max_size=n_cols),
                min_size=n_rows,
                max_size=n_rows,
            )
        )
    )
    mask = None
    nodata = None
    if use_nodata:
        nodata = -1.0
        mask = counts > 5e5
        counts = np.where(mask, 0.0, counts)
        if not mask.any():
            mask = None
    grid = PopulationGrid(
        n_rows=n_rows,
        n_cols=n_cols,
        origin_lat=-50.0,
        origin_lon=3.0,
        cell_height_arcsec=30.0,
        cell_width_arcsec=30.0 if square else 45.0,
        counts=counts,
        nodata=nodata,
        nodata_mask=mask,
    )
    p = tmp_path_factory.mktemp("rt") / "g.asc"
    save_population_grid(grid, p, "esri-ascii")
    back = load_population_grid(p, format="esri-ascii")
    assert np.array_equal(back.counts, grid.counts)
    assert back.cell_width_arcsec == pytest.approx(grid.cell_width_arcsec, rel=1e-12)
    if mask is not None:
        assert np.array_equal(back.nodata_mask, mask)


def write_network(tmp_path, nodes_rows, edges_rows):
    d = tmp_path / "net"
    d.mkdir(exist_ok=True)
    (d / "nodes.csv").write_text("node_id,lat,lon\n" + "".join(r + "\n" for r in nodes_rows))
    (d / "edges.csv").write_text("u,v,length_m,oneway\n" + "".join(r + "\n" for r in edges_rows))
    return d


def test_isolated_nodes(tmp_path):
    d = write_network(tmp_path, ["a,0,0", "b,1,1", "c,2,2"], [])
    net = load_road_network(d)
    assert len(net.nodes) == 3 and len(net.edges) == 0
    assert net.adjacency == {"a": [], "b": [], "c": []}


def test_dangling_edge_names_id(tmp_path):
    d = write_network(tmp_path, ["a,0,0"], ["a,ghost,5.0,0"])
    with pytest.raises(MissingReferenceError, match="ghost"):
        load_road_network(d)


def test_nonpositive_length_rejected(tmp_path):
    d = write_network(tmp_path, ["a,0,0", "b,1,1"], ["a,b,0.0,0"])
    with pytest.raises(DataError):
        load_road_network(d)


def test_self_loop_rejected(tmp_path):
    d = write_network(tmp_path, ["a,0,0"], ["a,a,5.0,0"])
    with pytest.raises(DataError):
        load_road_network(d)


def test_triangle_roundtrip_adjacency(tmp_path):
    net = RoadNetwork(
        nodes=(("a", 0.0, 0.0), ("b", 0.0, 1.0), ("c", 1.0, 0.0)),
        edges=(("a", "b", 10.0, False), ("b", "c", 20.0, True), ("c", "a", 30.0, False)),
    )
    out = tmp_path / "net"
    save_road_network(net, out)
    back = load_road_network(out)
    assert back.adjacency == net.adjacency
    assert back.nodes == net.nodes
    assert back.edges == net.edges


def test_matrix_singleton():
    m = DistanceMatrix(np.zeros((1, 1)))
    assert m.n == 1


def test_matrix_nonzero_diagonal_rejected(tmp_path):
    values = np.zeros((3, 3))
    values[2, 2] = 5.0
    p = tmp_path / "m.csv"
    with open(p, "w") as fh:
        for row in values:
            fh.write(",".join(str(v) for v in row) + "\n")
    with pytest.raises(DataError, match=r"d\(2,2\)"):
        load_distance_matrix(p)


def test_matrix_roundtrip_bit_identical(tmp_path, rng):
    values = rng.random((50, 50)) * 1e6
    values = np.triu(values, 1) + np.tril(values, -1)  # zero diagonal, asymmetric
    m = DistanceMatrix(values)
    p = tmp_path / "m.cdm"
    save_distance_matrix(m, p)
    back = load_distance_matrix(p)
    assert back.values.tobytes() == values.tobytes()
    assert back.provider == "loaded"


def test_matrix_csv_roundtrip_with_inf(tmp_path):
    values = np.array([[0.0, math.inf], [5.5, 0.0]])
    p = tmp_path / "m.csv"
    save_distance_matrix_csv(DistanceMatrix(values), p)
    back = load_distance_matrix(p)
    assert np.array_equal(back.values, values)


def test_matrix_dimension_mismatch(tmp_path):
    p = tmp_path / "m.cdm"
    save_distance_matrix(DistanceMatrix(np.zeros((2, 2))), p)
    raw = p.read_bytes()
    p.write_bytes(raw[:-8])  # truncate one value
    with pytest.raises(FormatError):
        load_distance_matrix(p)


def test_matrix_negative_rejected(tmp_path):
    p = tmp_path / "m.csv"
    p.write_text("0.0,-1.0\n2.0,0.0\n")
    with pytest.raises(DataError):
        load_distance_matrix(p)
