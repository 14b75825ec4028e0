"""Monte Carlo tests: spacing-out of the largest cities, and commonality of
power laws across a spatial hierarchy.

Spacing-out test
    Draw M random Voronoi K-partitions; for each, count the cells touched
    by the L largest cities. For each of those partitions draw M random
    partitions of the same cell sizes (no regard to space) and count again.
    The one-sided p-value ranks the observed mean count among the random
    mean counts; under the null both are draws from one population, so
    p0 = (1 + #{random mean >= observed mean}) / (M + 1).

Spatial CPL test
    Fit the common-slope regression over the global hinterlands of the
    observed largest-city hierarchy, then over N size-matched random
    hierarchies; p_L = (1 + #{random RMSE <= observed RMSE}) / (N + 1).

Replicate streams derive from (seed, test name, parameters, replicate
index), so results are independent of evaluation order and thread count.
Counts are aggregated as integers, which makes the mean comparisons exact.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .cities import CitySet
from .errors import ArgumentError, DataError, DegenerateFitError
from .geo import DistanceMatrix
from .partition import (
    HierarchicalPartition,
    build_random_hierarchy,
    build_spatial_hierarchy,
    global_hinterlands,
    random_centers,
    voronoi_partition,
)
from .seeding import substream
from .stats import CplFit, RankSizeSample, fit_cpl

SIGNIFICANCE_BANDS = ((0.01, "p<0.01", "red"), (0.05, "0.01<=p<0.05", "orange"), (0.1, "0.05<=p<0.1", "yellow"))


def significance_class(p: float) -> tuple[str, str]:
    """Label and display color for the four standard p-value bands."""
    for cut, label, color in SIGNIFICANCE_BANDS:
        if p < cut:
            return label, color
    return "p>=0.1", "linen"


@dataclass(frozen=True, eq=False)
class SpacingTestResult:
    K: int
    L: int
    M: int
    mean_count_voronoi: float
    mean_counts_random: np.ndarray
    p0: float
    significance: str
    color: str
    seed: int


@dataclass(frozen=True, eq=False)
class CplTestResult:
    L: int
    N: int
    rmse_observed: float
    rmse_random: np.ndarray
    p_L: float
    theta_hat: float
    m: int
    n_obs: int
    node_count: int
    hinterland_count: int
    min_subset_size: int
    seed: int


def _distinct_labels_count(labels: np.ndarray) -> np.ndarray:
    """Distinct values per row of an (M, L) int matrix."""
    s = np.sort(labels, axis=1)
    return 1 + (np.diff(s, axis=1) != 0).sum(axis=1)


def _random_counts_shortcut(
    sizes: np.ndarray, L: int, draws: int, rng: np.random.Generator
) -> np.ndarray:
    """Cells touched by the L largest under `draws` random partitions of the
    given sizes, sampling only those L cities' cell labels.

    Sequentially assigns city ranks 1..L a cell with probability
    proportional to the cell's remaining capacity; this is exactly the
    marginal law of a full uniform shuffle restricted to the L largest.
    """
    K = sizes.size
    n = int(sizes.sum())
    rem = np.tile(sizes.astype(np.int64), (draws, 1))
    occupied = np.zeros((draws, K), dtype=bool)
    rows = np.arange(draws)
    for step in range(L):
        u = rng.random(draws) * (n - step)
        cum = np.cumsum(rem, axis=1)
        choice = (cum <= u[:, None]).sum(axis=1)
        occupied[rows, choice] = True
        rem[rows, choice] -= 1
    return occupied.sum(axis=1).astype(np.int64)


def _random_counts_shuffle(
    sizes: np.ndarray, L: int, draws: int, rng: np.random.Generator
) -> np.ndarray:
    """Same statistic via full shuffles of all n cities (verification path)."""
    labels = np.repeat(np.arange(sizes.size), sizes)
    out = np.empty(draws, dtype=np.int64)
    for w in range(draws):
        perm = rng.permutation(labels)
        out[w] = np.unique(perm[:L]).size
    return out


def _spacing_replicate(
    cities: CitySet,
    d: DistanceMatrix,
    K: int,
    L: int,
    M: int,
    seed: int,
    v: int,
    method: str,
) -> tuple[int, np.ndarray]:
    rng_c = substream(seed, "spacing", K, L, "centers", v)
    centers = random_centers(cities, K, rng_c)
    part = voronoi_partition(cities, centers, d)
    observed = int(np.unique(part.cell_of[:L]).size)
    rng_w = substream(seed, "spacing", K, L, "random", v)
    sampler = _random_counts_shortcut if method == "shortcut" else _random_counts_shuffle
    counts = sampler(part.sizes(), L, M, rng_w)
    return observed, counts


def spacing_out_test(
    cities: CitySet,
    d: DistanceMatrix,
    K: int,
    L: int,
    M: int = 1000,
    seed: int = 0,
    method: str = "shortcut",
    threads: int = 1,
) -> SpacingTestResult:
    """One-sided Monte Carlo test that the L largest cities occupy more
    Voronoi cells than size-matched random partitions predict."""
    n = len(cities)
    if not (1 <= L <= n):
        raise ArgumentError(f"L must be in [1, {n}], got {L}")
    if not (1 <= K <= n):
        raise ArgumentError(f"K must be in [1, {n}], got {K}")
    if M < 1:
        raise ArgumentError(f"M must be >= 1, got {M}")
    if method not in ("shortcut", "shuffle"):
        raise ArgumentError(f"method must be 'shortcut' or 'shuffle', got {method!r}")

    observed = np.empty(M, dtype=np.int64)
    random_counts = np.empty((M, M), dtype=np.int64)

    def run(v: int) -> None:
        obs, counts = _spacing_replicate(cities, d, K, L, M, seed, v, method)
        observed[v] = obs
        random_counts[v] = counts

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(run, range(M)))
    else:
        for v in range(M):
            run(v)

    sum_observed = int(observed.sum())
    sums_random = random_counts.sum(axis=0)  # per-omega integer totals
    m0 = 1 + int(np.count_nonzero(sums_random >= sum_observed))
    p0 = m0 / (M + 1)
    label, color = significance_class(p0)
    return SpacingTestResult(
        K=K,
        L=L,
        M=M,
        mean_count_voronoi=sum_observed / M,
        mean_counts_random=sums_random / M,
        p0=p0,
        significance=label,
        color=color,
        seed=seed,
    )


def spacing_grid(
    cities: CitySet,
    d: DistanceMatrix,
    K_list: Sequence[int],
    L_list: Sequence[int],
    M: int = 1000,
    seed: int = 0,
    method: str = "shortcut",
    threads: int = 1,
) -> list[SpacingTestResult]:
    """One spacing test per (K, L) pair; substreams already key on (K, L),
    so every cell of the grid is independent and individually reproducible."""
    if not K_list or not L_list:
        raise ArgumentError("K_list and L_list must be nonempty")
    results = []
    for K in K_list:
        for L in L_list:
            results.append(
                spacing_out_test(cities, d, K, L, M=M, seed=seed, method=method, threads=threads)
            )
    return results


def hinterland_samples(h: HierarchicalPartition, populations: np.ndarray) -> list[RankSizeSample]:
    """Rank-size sample per global hinterland. Member ids follow the global
    size order, so member populations are already rank-sorted."""
    samples = []
    for entry in global_hinterlands(h):
        samples.append(
            RankSizeSample(subset_id=entry.center, sizes=populations[entry.members])
        )
    return samples


def fit_hierarchy(
    h: HierarchicalPartition, populations: np.ndarray, min_subset_size: int
) -> CplFit:
    return fit_cpl(hinterland_samples(h, populations), min_subset_size=min_subset_size)


def spatial_cpl_test(
    cities: CitySet,
    d: DistanceMatrix,
    L: int,
    N: int = 1000,
    min_subset_size: int = 2,
    seed: int = 0,
    threads: int = 1,
) -> CplTestResult:
    """One-sided Monte Carlo test that power laws are more alike across the
    observed spatial hierarchy's hinterlands than across random ones."""
    if N < 1:
        raise ArgumentError(f"N must be >= 1, got {N}")
    populations = cities.populations
    if populations.size == 0:
        raise ArgumentError("empty city set")
    if populations.min() <= 0:
        raise DataError("nonpositive city population")

    hier = build_spatial_hierarchy(cities, L, d)
    try:
        fit_obs = fit_hierarchy(hier, populations, min_subset_size)
    except DegenerateFitError as exc:
        raise DegenerateFitError(f"L={L}: {exc}") from None

    rmse_random = np.empty(N)

    def run(v: int) -> None:
        rng = substream(seed, "cpl", L, v)
        rh = build_random_hierarchy(hier, cities, rng)
        rmse_random[v] = fit_hierarchy(rh, populations, min_subset_size).rmse

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(run, range(N)))
    else:
        for v in range(N):
            run(v)

    n_le = 1 + int(np.count_nonzero(rmse_random <= fit_obs.rmse))
    return CplTestResult(
        L=L,
        N=N,
        rmse_observed=fit_obs.rmse,
        rmse_random=rmse_random,
        p_L=n_le / (N + 1),
        theta_hat=fit_obs.theta,
        m=fit_obs.m,
        n_obs=fit_obs.n_obs,
        node_count=hier.node_count(),
        hinterland_count=fit_obs.m + fit_obs.n_excluded,
        min_subset_size=min_subset_size,
        seed=seed,
    )


def theta_profile(
    cities: CitySet,
    d: DistanceMatrix,
    L_list: Sequence[int],
    min_subset_size: int = 2,
) -> list[dict]:
    """Common-slope estimate of the observed hierarchy for each L."""
    if not L_list:
        raise ArgumentError("L_list must be nonempty")
    populations = cities.populations
    rows = []
    for L in L_list:
        hier = build_spatial_hierarchy(cities, L, d)
        fit = fit_hierarchy(hier, populations, min_subset_size)
        rows.append(
            {
                "L": L,
                "theta_hat": fit.theta,
                "rmse": fit.rmse,
                "subsets_used": fit.m,
                "n_obs": fit.n_obs,
            }
        )
    return rows
