"""Readers and writers for population rasters, road networks, distance matrices.

Supported formats
-----------------
ESRI ASCII grid
    Header lines ``ncols``, ``nrows``, ``xllcorner``, ``yllcorner``, then
    either ``cellsize`` (square cells, decimal degrees) or both ``dx`` and
    ``dy`` (anisotropic extension), optionally ``NODATA_value``; data rows
    follow, north to south. Keys are case-insensitive.

Packed binary grid (``CPG1``)
    Magic ``CPG1``; u32 n_rows, u32 n_cols; f64 origin_lat, origin_lon
    (degrees of the grid's south-west corner); f64 cell height and width in
    arc-seconds; then n_rows*n_cols little-endian f64 counts, row-major from
    the north-west corner. NODATA cells are stored as NaN.

Road network
    A directory holding ``nodes.csv`` (``node_id,lat,lon``) and
    ``edges.csv`` (``u,v,length_m,oneway`` with oneway in {0, 1}). Node ids
    are treated as opaque strings.

Distance matrix (``CDM1``)
    Magic ``CDM1``; u32 n; n*n little-endian f64 meters, row-major, row =
    origin city index in city-set order. A plain ``.csv`` square matrix is
    accepted as an interchange form.

All parsing is locale-independent and tolerant of CRLF line endings.
Returned objects are immutable after construction and safe to share across
threads.
"""

from __future__ import annotations

import csv
import math
import struct
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import (
    ArgumentError,
    CapacityError,
    DataError,
    FormatError,
    MissingReferenceError,
)
from .geo import DistanceMatrix

GRID_MAGIC = b"CPG1"
MATRIX_MAGIC = b"CDM1"

# 2^31 cells (~17 GB of f64) comfortably covers a global 30-arcsec raster.
MAX_GRID_CELLS = 2**31


@dataclass(frozen=True, eq=False)
class PopulationGrid:
    """Raster of population counts on an angular lat/lon lattice.

    `counts` is (n_rows, n_cols) float64, row 0 northernmost. `origin_lat`
    and `origin_lon` locate the grid's south-west corner. NODATA cells hold
    count 0; the sentinel and its mask are kept only for provenance.
    """

    n_rows: int
    n_cols: int
    origin_lat: float
    origin_lon: float
    cell_height_arcsec: float
    cell_width_arcsec: float
    counts: np.ndarray
    nodata: Optional[float] = None
    nodata_mask: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.n_rows <= 0 or self.n_cols <= 0:
            raise DataError("grid dimensions must be positive")
        if self.counts.shape != (self.n_rows, self.n_cols):
            raise DataError(
                f"counts shape {self.counts.shape} != ({self.n_rows}, {self.n_cols})"
            )
        if self.cell_height_arcsec <= 0 or self.cell_width_arcsec <= 0:
            raise DataError("cell extents must be positive")
        if abs(self.origin_lat) > 90.0:
            raise DataError(f"origin latitude {self.origin_lat} outside [-90, 90]")
        if np.isnan(self.counts).any():
            raise DataError("counts contain NaN; use the nodata mask")
        if self.counts.min(initial=0.0) < 0.0:
            r, c = np.unravel_index(int(np.argmin(self.counts)), self.counts.shape)
            raise DataError(f"negative count at row {r}, col {c}")

    @property
    def cell_height_deg(self) -> float:
        return self.cell_height_arcsec / 3600.0

    @property
    def cell_width_deg(self) -> float:
        return self.cell_width_arcsec / 3600.0

    @property
    def top_lat(self) -> float:
        return self.origin_lat + self.n_rows * self.cell_height_deg

    def row_center_lat(self, row: int) -> float:
        """Latitude of the row's cell centers; row 0 is the northernmost."""
        if not (0 <= row < self.n_rows):
            raise IndexError(f"row {row} out of range [0, {self.n_rows})")
        return self.origin_lat + (self.n_rows - row - 0.5) * self.cell_height_deg

    def cell_center(self, row: int, col: int) -> tuple[float, float]:
        if not (0 <= col < self.n_cols):
            raise IndexError(f"col {col} out of range [0, {self.n_cols})")
        lat = self.row_center_lat(row)
        lon = self.origin_lon + (col + 0.5) * self.cell_width_deg
        return lat, lon


def _check_capacity(n_rows: int, n_cols: int) -> None:
    if n_rows * n_cols > MAX_GRID_CELLS:
        raise CapacityError(
            f"grid of {n_rows} x {n_cols} cells exceeds the {MAX_GRID_CELLS}-cell cap"
        )


def _parse_float(text: str, what: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise FormatError(f"cannot parse {what}: {text!r}") from None


def _load_grid_ascii(path: Path) -> PopulationGrid:
    lines = path.read_text().splitlines()
    header: dict[str, float] = {}
    data_start = None
    for i, line in enumerate(lines):
        tokens = line.split()
        if not tokens:
            continue
        key = tokens[0].lower()
        if key[0].isalpha() or key[0] == "_":
            if len(tokens) != 2:
                raise FormatError(f"header line {i + 1} is not a key/value pair: {line!r}")
            header[key] = _parse_float(tokens[1], f"header field {key!r}")
        else:
            data_start = i
            break

    for required in ("ncols", "nrows", "xllcorner", "yllcorner"):
        if required not in header:
            raise FormatError(f"missing header field {required!r}")
    if "cellsize" in header:
        dy_deg = dx_deg = header["cellsize"]
    elif "dx" in header and "dy" in header:
        dx_deg, dy_deg = header["dx"], header["dy"]
    else:
        raise FormatError("missing header field 'cellsize' (or 'dx'/'dy' pair)")
    if dx_deg <= 0 or dy_deg <= 0:
        raise FormatError("header field 'cellsize' must be positive")

    n_cols = int(header["ncols"])
    n_rows = int(header["nrows"])
    if n_cols != header["ncols"] or n_rows != header["nrows"] or n_cols <= 0 or n_rows <= 0:
        raise FormatError("header fields 'ncols'/'nrows' must be positive integers")
    _check_capacity(n_rows, n_cols)
    nodata = header.get("nodata_value")
    if data_start is None:
        raise FormatError("no data rows after header")

    counts = np.zeros((n_rows, n_cols))
    mask = np.zeros((n_rows, n_cols), dtype=bool)
    row = 0
    for i in range(data_start, len(lines)):
        tokens = lines[i].split()
        if not tokens:
            continue
        if row >= n_rows:
            raise FormatError(f"more than the declared {n_rows} data rows")
        if len(tokens) != n_cols:
            raise FormatError(
                f"data row {row} has {len(tokens)} values, header declares ncols={n_cols}"
            )
        values = np.array([_parse_float(t, f"count in data row {row}") for t in tokens])
        if nodata is not None:
            hit = values == nodata
            mask[row] = hit
            values = np.where(hit, 0.0, values)
        bad = values < 0.0
        if bad.any():
            col = int(np.nonzero(bad)[0][0])
            raise DataError(f"negative count at row {row}, col {col}")
        counts[row] = values
        row += 1
    if row != n_rows:
        raise FormatError(f"found {row} data rows, header declares nrows={n_rows}")

    return PopulationGrid(
        n_rows=n_rows,
        n_cols=n_cols,
        origin_lat=header["yllcorner"],
        origin_lon=header["xllcorner"],
        cell_height_arcsec=dy_deg * 3600.0,
        cell_width_arcsec=dx_deg * 3600.0,
        counts=counts,
        nodata=nodata,
        nodata_mask=mask if mask.any() else None,
    )


def _load_grid_packed(path: Path) -> PopulationGrid:
    raw = path.read_bytes()
    head = struct.calcsize("<4sIIdddd")
    if len(raw) < head:
        raise FormatError("truncated packed grid header")
    magic, n_rows, n_cols, origin_lat, origin_lon, dh, dw = struct.unpack_from(
        "<4sIIdddd", raw
    )
    if magic != GRID_MAGIC:
        raise FormatError(f"bad magic {magic!r}, expected {GRID_MAGIC!r}")
    if n_rows == 0 or n_cols == 0:
        raise FormatError("header fields n_rows/n_cols must be positive")
    _check_capacity(n_rows, n_cols)
    expected = head + 8 * n_rows * n_cols
    if len(raw) != expected:
        raise FormatError(
            f"file holds {len(raw)} bytes, header implies {expected} (n_rows*n_cols payload)"
        )
    counts = np.frombuffer(raw, dtype="<f8", count=n_rows * n_cols, offset=head)
    counts = counts.reshape(n_rows, n_cols).astype(np.float64)
    mask = np.isnan(counts)
    nodata = math.nan if mask.any() else None
    counts = np.where(mask, 0.0, counts)
    bad = counts < 0.0
    if bad.any():
        r, c = np.unravel_index(int(np.argmax(bad)), counts.shape)
        raise DataError(f"negative count at row {r}, col {c}")
    return PopulationGrid(
        n_rows=int(n_rows),
        n_cols=int(n_cols),
        origin_lat=origin_lat,
        origin_lon=origin_lon,
        cell_height_arcsec=dh,
        cell_width_arcsec=dw,
        counts=counts,
        nodata=nodata,
        nodata_mask=mask if mask.any() else None,
    )


def load_population_grid(path, format: str = "auto") -> PopulationGrid:
    """Load a population raster; `format` is 'esri-ascii', 'packed-binary' or 'auto'."""
    path = Path(path)
    if format == "auto":
        with open(path, "rb") as fh:
            format = "packed-binary" if fh.read(4) == GRID_MAGIC else "esri-ascii"
    if format == "esri-ascii":
        return _load_grid_ascii(path)
    if format == "packed-binary":
        return _load_grid_packed(path)
    raise ArgumentError(f"unknown grid format {format!r}")


def save_population_grid(grid: PopulationGrid, path, format: str) -> None:
    path = Path(path)
    if format == "esri-ascii":
        _save_grid_ascii(grid, path)
    elif format == "packed-binary":
        _save_grid_packed(grid, path)
    else:
        raise ArgumentError(f"unknown grid format {format!r}")


def _save_grid_ascii(grid: PopulationGrid, path: Path) -> None:
    lines = [
        f"ncols {grid.n_cols}",
        f"nrows {grid.n_rows}",
        f"xllcorner {grid.origin_lon!r}",
        f"yllcorner {grid.origin_lat!r}",
    ]
    if grid.cell_height_arcsec == grid.cell_width_arcsec:
        lines.append(f"cellsize {grid.cell_height_deg!r}")
    else:
        lines.append(f"dx {grid.cell_width_deg!r}")
        lines.append(f"dy {grid.cell_height_deg!r}")
    if grid.nodata is not None:
        lines.append(f"NODATA_value {grid.nodata!r}")
    out = grid.counts
    if grid.nodata_mask is not None:
        out = np.where(grid.nodata_mask, grid.nodata, out)
    for row in out:
        lines.append(" ".join(repr(v) for v in row.tolist()))
    path.write_text("\n".join(lines) + "\n")


def _save_grid_packed(grid: PopulationGrid, path: Path) -> None:
    out = grid.counts
    if grid.nodata_mask is not None:
        out = np.where(grid.nodata_mask, np.nan, out)
    with open(path, "wb") as fh:
        fh.write(
            struct.pack(
                "<4sIIdddd",
                GRID_MAGIC,
                grid.n_rows,
                grid.n_cols,
                grid.origin_lat,
                grid.origin_lon,
                grid.cell_height_arcsec,
                grid.cell_width_arcsec,
            )
        )
        fh.write(np.ascontiguousarray(out, dtype="<f8").tobytes())


@dataclass(frozen=True, eq=False)
class RoadNetwork:
    """Road graph: nodes are (id, lat, lon); edges are (u, v, length_m, oneway).

    Undirected edges are stored once with oneway=False; `adjacency` expands
    them into arcs.
    """

    nodes: tuple[tuple[str, float, float], ...]
    edges: tuple[tuple[str, str, float, bool], ...] = field(default_factory=tuple)

    def __post_init__(self):
        ids = [nid for nid, _, _ in self.nodes]
        if len(set(ids)) != len(ids):
            raise DataError("duplicate node ids with conflicting coordinates")
        known = set(ids)
        for u, v, length, _ in self.edges:
            if u == v:
                raise DataError(f"self-loop edge at node {u!r}")
            if length <= 0:
                raise DataError(f"nonpositive edge length {length} on ({u!r}, {v!r})")
            for endpoint in (u, v):
                if endpoint not in known:
                    raise MissingReferenceError(f"edge endpoint {endpoint!r} is not a node")

    @cached_property
    def node_index(self) -> dict[str, int]:
        return {nid: i for i, (nid, _, _) in enumerate(self.nodes)}

    @cached_property
    def adjacency(self) -> dict[str, list[tuple[str, float]]]:
        adj: dict[str, list[tuple[str, float]]] = {nid: [] for nid, _, _ in self.nodes}
        for u, v, length, oneway in self.edges:
            adj[u].append((v, length))
            if not oneway:
                adj[v].append((u, length))
        return adj


def _network_files(path) -> tuple[Path, Path]:
    path = Path(path)
    if path.is_dir():
        return path / "nodes.csv", path / "edges.csv"
    if path.name == "nodes.csv":
        return path, path.with_name("edges.csv")
    raise ArgumentError(
        f"{path} is neither a network directory nor a nodes.csv file"
    )


def load_road_network(path) -> RoadNetwork:
    """Load nodes.csv + edges.csv from a directory (or the nodes.csv path)."""
    nodes_path, edges_path = _network_files(path)

    nodes: list[tuple[str, float, float]] = []
    seen: dict[str, tuple[float, float]] = {}
    with open(nodes_path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or [f.strip() for f in reader.fieldnames] != [
            "node_id",
            "lat",
            "lon",
        ]:
            raise FormatError(f"{nodes_path} header must be node_id,lat,lon")
        for i, row in enumerate(reader):
            nid = row["node_id"]
            lat = _parse_float(row["lat"], f"lat in {nodes_path} row {i + 1}")
            lon = _parse_float(row["lon"], f"lon in {nodes_path} row {i + 1}")
            if nid in seen:
                if seen[nid] != (lat, lon):
                    raise DataError(f"node {nid!r} repeated with different coordinates")
                continue
            seen[nid] = (lat, lon)
            nodes.append((nid, lat, lon))

    edges: list[tuple[str, str, float, bool]] = []
    edge_seen: set[tuple[str, str, float, bool]] = set()
    with open(edges_path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or [f.strip() for f in reader.fieldnames] != [
            "u",
            "v",
            "length_m",
            "oneway",
        ]:
            raise FormatError(f"{edges_path} header must be u,v,length_m,oneway")
        for i, row in enumerate(reader):
            length = _parse_float(row["length_m"], f"length_m in {edges_path} row {i + 1}")
            if row["oneway"] not in ("0", "1"):
                raise FormatError(f"oneway must be 0 or 1 in {edges_path} row {i + 1}")
            edge = (row["u"], row["v"], length, row["oneway"] == "1")
            if edge in edge_seen:
                continue
            edge_seen.add(edge)
            edges.append(edge)

    return RoadNetwork(nodes=tuple(nodes), edges=tuple(edges))


def save_road_network(network: RoadNetwork, directory) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    with open(directory / "nodes.csv", "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["node_id", "lat", "lon"])
        for nid, lat, lon in network.nodes:
            writer.writerow([nid, repr(lat), repr(lon)])
    with open(directory / "edges.csv", "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["u", "v", "length_m", "oneway"])
        for u, v, length, oneway in network.edges:
            writer.writerow([u, v, repr(length), int(oneway)])


def load_distance_matrix(path) -> DistanceMatrix:
    """Load a CDM1 binary matrix, or a square CSV matrix if the path ends in .csv."""
    path = Path(path)
    if path.suffix.lower() == ".csv":
        rows = []
        with open(path, newline="") as fh:
            for i, line in enumerate(csv.reader(fh)):
                if not line:
                    continue
                rows.append([_parse_float(t, f"matrix entry in row {i}") for t in line])
        n = len(rows)
        if any(len(r) != n for r in rows):
            raise FormatError(f"CSV matrix is not square ({n} rows)")
        if n == 0:
            raise FormatError("empty CSV matrix")
        return DistanceMatrix(np.array(rows), provider="loaded")

    raw = path.read_bytes()
    head = struct.calcsize("<4sI")
    if len(raw) < head:
        raise FormatError("truncated distance matrix header")
    magic, n = struct.unpack_from("<4sI", raw)
    if magic != MATRIX_MAGIC:
        raise FormatError(f"bad magic {magic!r}, expected {MATRIX_MAGIC!r}")
    expected = head + 8 * n * n
    if len(raw) != expected:
        raise FormatError(f"file holds {len(raw)} bytes, header implies {expected} (n={n})")
    values = np.frombuffer(raw, dtype="<f8", count=n * n, offset=head)
    return DistanceMatrix(values.reshape(n, n).astype(np.float64), provider="loaded")


def save_distance_matrix(matrix: DistanceMatrix, path) -> None:
    with open(path, "wb") as fh:
        fh.write(struct.pack("<4sI", MATRIX_MAGIC, matrix.n))
        fh.write(np.ascontiguousarray(matrix.values, dtype="<f8").tobytes())


def save_distance_matrix_csv(matrix: DistanceMatrix, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        for row in matrix.values:
            writer.writerow([repr(v) for v in row.tolist()])
