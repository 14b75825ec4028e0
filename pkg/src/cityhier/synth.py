"""Synthetic city systems with known ground truth.

Two generators, both planar-Euclidean (the tests downstream consume only a
distance matrix, so geometric fidelity buys nothing):

* ``iid-zipf`` — sizes drawn iid Pareto, locations uniform on a square.
  Sizes and locations are independent, so spatial tests should find
  nothing.
* ``hierarchical`` — a recursive ring construction in which every center
  keeps its place and spawns ``L_gen - 1`` smaller centers around it, layer
  by layer, with ring radii shrinking geometrically; optional satellite
  cities cluster around the final centers. Spatial grouping holds by
  construction, giving the tests known positives.

Coordinates are kept in km internally; city centers are also embedded as
lat/lon near the equator (1 km ~ 1/111.2 degrees) so synthetic systems can
flow through the same CSV/matrix files as real data. The emitted distance
matrix always carries the planar Euclidean values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .cities import City, CitySet
from .errors import ArgumentError, GeometryError
from .geo import EARTH_RADIUS_M, DistanceMatrix
from .seeding import substream

_DEG_PER_KM = 180.0 / (math.pi * EARTH_RADIUS_M / 1000.0)


@dataclass(frozen=True)
class SynthSpec:
    """Configuration for a synthetic system.

    iid-zipf uses: n, alpha_gen, min_size, domain_km.
    hierarchical uses: L_gen, depth, satellites, alpha_gen, min_size,
    spacing_km (layer-2 ring radius), spacing_decay (ring shrink per
    layer), cluster_radius_km (satellite disc; default derived).
    size_noise_sigma > 0 multiplies sizes by lognormal noise.
    """

    model: str
    seed: int = 0
    n: int = 100
    alpha_gen: float = 1.0
    min_size: float = 10_000.0
    domain_km: float = 3000.0
    L_gen: int = 3
    depth: int = 3
    satellites: int = 0
    spacing_km: float = 1000.0
    spacing_decay: float = 0.25
    cluster_radius_km: Optional[float] = None
    size_noise_sigma: float = 0.0

    def __post_init__(self):
        if self.model not in ("iid-zipf", "hierarchical"):
            raise ArgumentError(f"unknown model {self.model!r}")
        if self.n < 1 or self.L_gen < 1 or self.depth < 1 or self.satellites < 0:
            raise ArgumentError("counts must be >= 1 (satellites >= 0)")
        if self.alpha_gen <= 0:
            raise ArgumentError("alpha_gen must be positive")
        if self.min_size <= 0 or self.domain_km <= 0 or self.spacing_km <= 0:
            raise ArgumentError("extents must be positive")
        if not (0 < self.spacing_decay < 1):
            raise ArgumentError("spacing_decay must be in (0, 1)")
        if self.size_noise_sigma < 0:
            raise ArgumentError("size_noise_sigma must be >= 0")


def _ring_radius(spec: SynthSpec, layer: int) -> float:
    """Ring radius for centers first appearing at `layer` (>= 2)."""
    return spec.spacing_km * spec.spacing_decay ** (layer - 2)


def min_center_separation_km(spec: SynthSpec, layer: int) -> float:
    """Guaranteed lower bound on pairwise distance among centers present at
    `layer` (centers whose first layer is <= `layer`).

    Within one ring the closest pair is min(radius, adjacent chord); across
    rings, descendants drift at most r/(1 - decay) from their seed, which
    eats into the parent-level guarantee.
    """
    if layer <= 1 or spec.depth == 1:
        return math.inf
    r = _ring_radius(spec, layer)
    if spec.L_gen == 2:
        same_ring = r  # single new center: closest pair is parent-child
    else:
        same_ring = min(r, 2.0 * r * math.sin(math.pi / (spec.L_gen - 1)))
    drift = 2.0 * r * spec.spacing_decay / (1.0 - spec.spacing_decay)
    return same_ring - drift


def _feasible(spec: SynthSpec) -> float:
    """Validate the cluster geometry; returns the satellite disc radius."""
    sep = min_center_separation_km(spec, spec.depth)
    if spec.depth > 1 and sep <= 0:
        raise GeometryError(
            f"ring geometry infeasible: layer-{spec.depth} separation bound {sep:.3f} km"
        )
    base = _ring_radius(spec, spec.depth) if spec.depth > 1 else spec.spacing_km
    r_sat = (
        spec.cluster_radius_km
        if spec.cluster_radius_km is not None
        else base * spec.spacing_decay
    )
    if spec.satellites and spec.depth > 1 and 2.0 * r_sat >= sep:
        raise GeometryError(
            f"satellite radius {r_sat:.3f} km overlaps neighbor clusters (separation {sep:.3f} km)"
        )
    return r_sat


def _zipf_sizes(spec: SynthSpec, n: int, rng: np.random.Generator) -> np.ndarray:
    """Sizes along the construction order: exact Zipf profile, optional noise.

    s_r = min_size * ((n - 0.5)/(r - 0.5))^(1/alpha), so the smallest is
    min_size and the profile follows the target tail exponent.
    """
    r = np.arange(1, n + 1)
    sizes = spec.min_size * ((n - 0.5) / (r - 0.5)) ** (1.0 / spec.alpha_gen)
    if spec.size_noise_sigma > 0:
        sizes = sizes * np.exp(spec.size_noise_sigma * rng.standard_normal(n))
    return sizes


def _build_city_set(
    xy_km: np.ndarray, sizes: np.ndarray, meta: dict
) -> tuple[CitySet, DistanceMatrix]:
    n = xy_km.shape[0]
    order = sorted(range(n), key=lambda i: (-sizes[i], i))
    cities = []
    for new_id, site in enumerate(order):
        x, y = xy_km[site]
        cities.append(
            City(
                id=new_id,
                population=float(sizes[site]),
                center_cell=(0, site),
                center_lat=float(y * _DEG_PER_KM),
                center_lon=float(x * _DEG_PER_KM),
                n_cells=1,
            )
        )
    pts = xy_km[order]
    delta = pts[:, None, :] - pts[None, :, :]
    values = np.sqrt((delta**2).sum(axis=2)) * 1000.0
    np.fill_diagonal(values, 0.0)
    meta = dict(meta, site_of_id=order)
    cs = CitySet(cities=tuple(cities), meta=meta)
    return cs, DistanceMatrix(values, provider="loaded")


def gen_iid_system(spec: SynthSpec) -> tuple[CitySet, DistanceMatrix]:
    """Sizes iid Pareto(alpha_gen) above min_size; locations uniform; sizes
    and locations independent by construction."""
    if spec.model != "iid-zipf":
        raise ArgumentError(f"spec model is {spec.model!r}, expected 'iid-zipf'")
    rng = substream(spec.seed, "synth-iid")
    u = rng.random(spec.n)
    sizes = spec.min_size * (1.0 - u) ** (-1.0 / spec.alpha_gen)
    xy = rng.random((spec.n, 2)) * spec.domain_km
    meta = {"model": "iid-zipf", "seed": spec.seed, "n": spec.n, "alpha_gen": spec.alpha_gen}
    return _build_city_set(xy, sizes, meta)


def gen_hierarchical_system(spec: SynthSpec) -> tuple[CitySet, DistanceMatrix]:
    """Recursive ring construction; see the module docstring.

    Returns n = L_gen^(depth-1) * (1 + satellites) cities. City-set meta
    records each site's first layer ('layer_of_site') and the per-layer
    separation bounds ('min_separation_km').
    """
    if spec.model != "hierarchical":
        raise ArgumentError(f"spec model is {spec.model!r}, expected 'hierarchical'")
    r_sat = _feasible(spec)
    rng = substream(spec.seed, "synth-hier")

    sites: list[tuple[float, float]] = [(0.0, 0.0)]
    layer_of: list[int] = [1]
    current = [0]  # site indices present at the previous layer
    for layer in range(2, spec.depth + 1):
        radius = _ring_radius(spec, layer)
        step = 2.0 * math.pi / max(1, spec.L_gen - 1)
        nxt = []
        for parent in current:
            nxt.append(parent)
            px, py = sites[parent]
            phase = rng.random() * 2.0 * math.pi
            for j in range(spec.L_gen - 1):
                ang = phase + j * step
                sites.append((px + radius * math.cos(ang), py + radius * math.sin(ang)))
                layer_of.append(layer)
                nxt.append(len(sites) - 1)
        current = nxt

    n_centers = len(sites)
    for center_site in range(n_centers):
        for _ in range(spec.satellites):
            ang = rng.random() * 2.0 * math.pi
            rad = r_sat * math.sqrt(rng.random())
            cx, cy = sites[center_site]
            sites.append((cx + rad * math.cos(ang), cy + rad * math.sin(ang)))
            layer_of.append(spec.depth + 1)

    sizes = _zipf_sizes(spec, len(sites), substream(spec.seed, "synth-hier-sizes"))
    meta = {
        "model": "hierarchical",
        "seed": spec.seed,
        "L_gen": spec.L_gen,
        "depth": spec.depth,
        "satellites": spec.satellites,
        "n_centers": n_centers,
        "layer_of_site": list(layer_of),
        "min_separation_km": {
            layer: min_center_separation_km(spec, layer)
            for layer in range(2, spec.depth + 1)
        },
        "satellite_radius_km": r_sat,
    }
    return _build_city_set(np.array(sites), sizes, meta)


def relocate_sizes(
    cities: CitySet, d: DistanceMatrix, rng: np.random.Generator
) -> tuple[CitySet, DistanceMatrix]:
    """Null-model rewiring: permute the size multiset uniformly across the
    existing sites, leaving all pairwise distances untouched."""
    n = len(cities)
    perm = rng.permutation(n)  # size rank k lands on the site of old city perm[k]
    size_at_site = np.empty(n)
    size_at_site[perm] = cities.populations
    order = sorted(range(n), key=lambda s: (-size_at_site[s], cities[s].center_cell))
    new_cities = []
    for new_id, site in enumerate(order):
        old = cities[site]
        new_cities.append(
            City(
                id=new_id,
                population=float(size_at_site[site]),
                center_cell=old.center_cell,
                center_lat=old.center_lat,
                center_lon=old.center_lon,
                n_cells=old.n_cells,
            )
        )
    values = d.values[np.ix_(order, order)].copy()
    meta = dict(cities.meta)
    meta["relocated"] = True
    return CitySet(cities=tuple(new_cities), meta=meta), DistanceMatrix(
        values, provider=d.provider
    )
