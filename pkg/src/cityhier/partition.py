"""Voronoi partitions of city sets and recursive largest-city hierarchies.

Conventions fixed here:

* Assignment uses the distance FROM the candidate city TO the center
  (matters only for asymmetric road matrices).
* Equidistant ties break by the center's position in the center list; for
  hierarchies that list is population-descending, so the larger city wins.
* "L largest cities of a region" means the global size order (population
  descending, deterministic tie-break) restricted to the region's members.
  City ids follow that order, so the L largest members of a node are simply
  its L smallest ids.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from typing import Iterator, Optional, Sequence

import numpy as np

from .cities import CitySet
from .errors import ArgumentError, ConnectivityError
from .geo import DistanceMatrix


@dataclass(frozen=True, eq=False)
class Partition:
    """Assignment of every city to one of K cells; `centers[k]` generates cell k."""

    cell_of: np.ndarray
    K: int
    centers: Optional[tuple[int, ...]] = None

    def __post_init__(self):
        if self.cell_of.size and (self.cell_of.min() < 0 or self.cell_of.max() >= self.K):
            raise ArgumentError("cell indices out of range")
        if self.centers is not None:
            for k, c in enumerate(self.centers):
                if self.cell_of[c] != k:
                    raise ArgumentError(f"center {c} not assigned to its own cell {k}")

    @property
    def n(self) -> int:
        return int(self.cell_of.size)

    def sizes(self) -> np.ndarray:
        return np.bincount(self.cell_of, minlength=self.K)


def _assign_nearest(sub: np.ndarray, n_pinned: int) -> np.ndarray:
    """Argmin cell per row of a members x centers distance block.

    Rows 0..n_pinned-1 are the centers themselves and are forced to their
    own cells. Ties elsewhere break toward the lower center position.
    """
    if sub.shape[0] > n_pinned:
        unreachable = np.isinf(sub[n_pinned:]).all(axis=1)
        if unreachable.any():
            i = int(np.nonzero(unreachable)[0][0])
            raise ConnectivityError(
                f"a city (row {n_pinned + i} of the block) is unreachable from every center"
            )
    assign = np.argmin(sub, axis=1)
    assign[:n_pinned] = np.arange(n_pinned)
    return assign


def voronoi_partition(
    cities: CitySet, centers: Sequence[int], d: DistanceMatrix
) -> Partition:
    """Assign each city to the nearest of the given centers."""
    n = len(cities)
    centers = [int(c) for c in centers]
    if len(set(centers)) != len(centers):
        raise ArgumentError("duplicate centers")
    if not centers:
        raise ArgumentError("need at least one center")
    for c in centers:
        if not (0 <= c < n):
            raise ArgumentError(f"center id {c} out of range")
    if d.n != n:
        raise ArgumentError(f"distance matrix is {d.n}x{d.n}, city set has {n}")

    sub = d.values[:, centers]
    non_center = np.ones(n, dtype=bool)
    non_center[centers] = False
    if np.isinf(sub[non_center]).all(axis=1).any():
        bad = np.nonzero(non_center & np.isinf(sub).all(axis=1))[0]
        raise ConnectivityError(
            f"cities unreachable from every center: {bad.tolist()}"
        )
    assign = np.argmin(sub, axis=1)
    assign[centers] = np.arange(len(centers))
    return Partition(cell_of=assign, K=len(centers), centers=tuple(centers))


def random_centers(cities: CitySet, K: int, rng: np.random.Generator) -> list[int]:
    """K distinct city ids, uniform without replacement."""
    n = len(cities)
    if not (1 <= K <= n):
        raise ArgumentError(f"K must be in [1, {n}], got {K}")
    return [int(c) for c in rng.choice(n, size=K, replace=False)]


def random_partition_with_sizes(
    cities: CitySet,
    sizes: Sequence[int],
    rng: np.random.Generator,
    pinned: Optional[dict[int, int]] = None,
) -> Partition:
    """Uniform random partition with the given cell sizes.

    `pinned` maps cell index -> city id fixed in that cell; the remaining
    cities fill the remaining slots via a full shuffle, which is uniform
    over admissible assignments.
    """
    n = len(cities)
    sizes = [int(s) for s in sizes]
    if any(s < 0 for s in sizes):
        raise ArgumentError("cell sizes must be nonnegative")
    if sum(sizes) != n:
        raise ArgumentError(f"cell sizes sum to {sum(sizes)}, need {n}")
    K = len(sizes)
    residual = list(sizes)
    cell_of = np.empty(n, dtype=np.int64)
    pool_mask = np.ones(n, dtype=bool)
    if pinned:
        seen = set()
        for k, cid in pinned.items():
            if not (0 <= k < K):
                raise ArgumentError(f"pinned cell {k} out of range")
            if not (0 <= cid < n):
                raise ArgumentError(f"pinned city {cid} out of range")
            if cid in seen:
                raise ArgumentError(f"city {cid} pinned twice")
            seen.add(cid)
            if residual[k] < 1:
                raise ArgumentError(f"cell {k} too small for its pinned city")
            residual[k] -= 1
            cell_of[cid] = k
            pool_mask[cid] = False
    pool = np.nonzero(pool_mask)[0]
    perm = pool[rng.permutation(pool.size)]
    start = 0
    for k, r in enumerate(residual):
        cell_of[perm[start : start + r]] = k
        start += r
    return Partition(cell_of=cell_of, K=K, centers=None)


@dataclass(eq=False)
class CellNode:
    """One region of a hierarchy: members sorted ascending by id (so the
    region's largest cities come first); children ordered by center rank."""

    layer: int
    center: int
    members: np.ndarray
    children: list["CellNode"] = field(default_factory=list)


@dataclass(frozen=True, eq=False)
class HierarchicalPartition:
    """Tree of Voronoi cells: each region with >= L member cities is split by
    its L largest members; smaller regions are leaves."""

    L: int
    root: CellNode
    provenance: str  # "spatial" | "random"

    @property
    def n(self) -> int:
        return int(self.root.members.size)

    def iter_nodes(self) -> Iterator[CellNode]:
        """Breadth-first, so layers come out in ascending order."""
        queue = deque([self.root])
        while queue:
            node = queue.popleft()
            yield node
            queue.extend(node.children)

    def node_count(self) -> int:
        return sum(1 for _ in self.iter_nodes())

    def depth(self) -> int:
        return max(node.layer for node in self.iter_nodes())


def build_spatial_hierarchy(
    cities: CitySet, L: int, d: DistanceMatrix
) -> HierarchicalPartition:
    """Recursive largest-city Voronoi partition.

    Root is the whole set (center = largest city). Every node with >= L
    members splits into the Voronoi cells of its L largest members; nodes
    with fewer members stop.
    """
    n = len(cities)
    if L < 2:
        raise ArgumentError(f"L must be >= 2, got {L}")
    if n == 0:
        raise ArgumentError("empty city set")
    if d.n != n:
        raise ArgumentError(f"distance matrix is {d.n}x{d.n}, city set has {n}")

    root = CellNode(layer=1, center=0, members=np.arange(n, dtype=np.int64))
    stack = [root]
    while stack:
        node = stack.pop()
        m = node.members
        if m.size < L:
            continue
        centers = m[:L]
        sub = d.values[np.ix_(m, centers)]
        assign = _assign_nearest(sub, L)
        for k in range(L):
            child = CellNode(
                layer=node.layer + 1,
                center=int(centers[k]),
                members=m[assign == k],
            )
            node.children.append(child)
            stack.append(child)
    return HierarchicalPartition(L=L, root=root, provenance="spatial")


def build_random_hierarchy(
    template: HierarchicalPartition, cities: CitySet, rng: np.random.Generator
) -> HierarchicalPartition:
    """Random counterpart of a spatial hierarchy.

    Wherever the template splits, the node's L largest members are pinned
    one-per-child as centers and the rest are assigned uniformly at random,
    holding every child's size to the template's. Each child then recurses
    with its own L largest members, so the tree shape matches the template
    exactly while spatial structure is destroyed.
    """
    n = len(cities)
    if template.root.members.size != n:
        raise ArgumentError(
            f"template covers {template.root.members.size} cities, set has {n}"
        )
    L = template.L
    root = CellNode(layer=1, center=0, members=np.arange(n, dtype=np.int64))
    stack = [(template.root, root)]
    while stack:
        tnode, node = stack.pop()
        if not tnode.children:
            continue
        m = node.members
        if m.size < L:
            raise ArgumentError("template splits a node smaller than L")
        child_sizes = [c.members.size for c in tnode.children]
        if sum(child_sizes) != m.size:
            raise ArgumentError("template/city-set mismatch: child sizes do not sum")
        pinned = m[:L]
        rest = m[L:]
        perm = rest[rng.permutation(rest.size)] if rest.size else rest
        start = 0
        for k, size_k in enumerate(child_sizes):
            chunk = perm[start : start + size_k - 1]
            start += size_k - 1
            members_k = np.sort(np.concatenate(([pinned[k]], chunk)))
            child = CellNode(layer=node.layer + 1, center=int(pinned[k]), members=members_k)
            node.children.append(child)
            stack.append((tnode.children[k], child))
    return HierarchicalPartition(L=L, root=root, provenance="random")


@dataclass(frozen=True, eq=False)
class Hinterland:
    center: int
    members: np.ndarray
    layer: int


@dataclass(frozen=True, eq=False)
class HinterlandSet:
    """One entry per distinct central city: the member set of the
    highest-layer (smallest layer index) node it centers."""

    entries: tuple[Hinterland, ...]

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self) -> Iterator[Hinterland]:
        return iter(self.entries)


def global_hinterlands(h: HierarchicalPartition) -> HinterlandSet:
    """Minimum-layer region per central city; the root entry covers all cities."""
    entries = []
    seen: set[int] = set()
    for node in h.iter_nodes():  # BFS => first hit is the minimum layer
        if node.center not in seen:
            seen.add(node.center)
            entries.append(Hinterland(center=node.center, members=node.members, layer=node.layer))
    return HinterlandSet(entries=tuple(entries))


def hierarchy_to_dict(h: HierarchicalPartition) -> dict:
    nodes = {}

    def make(node: CellNode) -> dict:
        return {
            "layer": node.layer,
            "center": node.center,
            "members": [int(x) for x in node.members],
            "children": [],
        }

    root_d = make(h.root)
    nodes[id(h.root)] = root_d
    queue = deque([h.root])
    while queue:
        node = queue.popleft()
        d = nodes[id(node)]
        for child in node.children:
            cd = make(child)
            nodes[id(child)] = cd
            d["children"].append(cd)
            queue.append(child)
    return {"L": h.L, "provenance": h.provenance, "root": root_d}


def hierarchy_from_dict(data: dict) -> HierarchicalPartition:
    def make(d: dict) -> CellNode:
        return CellNode(
            layer=int(d["layer"]),
            center=int(d["center"]),
            members=np.array(d["members"], dtype=np.int64),
        )

    root = make(data["root"])
    queue = deque([(data["root"], root)])
    while queue:
        d, node = queue.popleft()
        for cd in d["children"]:
            child = make(cd)
            node.children.append(child)
            queue.append((cd, child))
    return HierarchicalPartition(L=int(data["L"]), root=root, provenance=str(data["provenance"]))


def save_hierarchy_json(h: HierarchicalPartition, path) -> None:
    with open(path, "w") as fh:
        json.dump(hierarchy_to_dict(h), fh, sort_keys=True, indent=2)
        fh.write("\n")


def load_hierarchy_json(path) -> HierarchicalPartition:
    with open(path) as fh:
        return hierarchy_from_dict(json.load(fh))
