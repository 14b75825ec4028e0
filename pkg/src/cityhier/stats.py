"""Power-law estimation on rank-size data.

Slopes come from regressing log size on log(rank - 0.5); the half-rank
shift is the standard small-sample bias correction for power-law tails.
A pooled fit with one fixed effect per subset measures how well many
subsets share a single slope; its goodness of fit is plain RMSE with the
total observation count in the denominator (no degrees-of-freedom
correction), because inference downstream is by Monte Carlo ranking, not
by error-distribution assumptions. Natural logarithms throughout.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ArgumentError, DataError, DegenerateFitError

RANKSIZE_CSV_HEADER = ["subset_id", "rank", "size", "ln_rank_adj", "ln_size", "fitted"]


@dataclass(frozen=True, eq=False)
class RankSizeSample:
    """Sizes of one subset, largest first, with ranks 1..n."""

    subset_id: int
    sizes: np.ndarray

    def __post_init__(self):
        if self.sizes.size == 0:
            raise DataError("empty rank-size sample")
        if self.sizes.min() <= 0:
            raise DataError("sizes must be positive")
        if np.any(np.diff(self.sizes) > 0):
            raise DataError("sizes must be nonincreasing in rank")

    @property
    def n(self) -> int:
        return int(self.sizes.size)

    @property
    def ranks(self) -> np.ndarray:
        return np.arange(1, self.n + 1)


def rank_sizes(populations: Sequence[float], subset_id: int = 0) -> RankSizeSample:
    """Sort sizes descending into a rank-size sample.

    Equal sizes receive distinct consecutive ranks; the tie order is stable
    in the input order (city id order when fed from a city set).
    """
    sizes = np.asarray(populations, dtype=np.float64)
    if sizes.size == 0:
        raise DataError("empty population list")
    if sizes.min() <= 0:
        raise DataError("sizes must be positive")
    order = np.argsort(-sizes, kind="stable")
    return RankSizeSample(subset_id=subset_id, sizes=sizes[order])


@dataclass(frozen=True, eq=False)
class GiFit:
    """Half-rank-corrected log-log fit: ln s = b - theta * ln(rank - 0.5)."""

    theta: float
    b: float
    residuals: np.ndarray
    rmse: float
    n: int

    @property
    def alpha(self) -> float:
        """Tail exponent 1/theta."""
        return 1.0 / self.theta

    @property
    def scale(self) -> float:
        """Tail scale c with Pr(S > s) ~ c * s^-alpha, via b = ln(c n)/alpha."""
        return float(np.exp(self.b * self.alpha)) / self.n


def fit_gi(sample: RankSizeSample) -> GiFit:
    """Least squares of ln size on ln(rank - 0.5); theta is the negated slope."""
    if sample.n < 2:
        raise DegenerateFitError("need at least 2 observations to fit a slope")
    x = np.log(sample.ranks - 0.5)
    y = np.log(sample.sizes)
    xc = x - x.mean()
    sxx = float(xc @ xc)
    if sxx == 0.0:
        raise DegenerateFitError("zero regressor variance")
    slope = float(xc @ (y - y.mean())) / sxx
    b = float(y.mean() - slope * x.mean())
    residuals = y - (b + slope * x)
    rmse = float(np.sqrt(residuals @ residuals / sample.n))
    return GiFit(theta=-slope, b=b, residuals=residuals, rmse=rmse, n=sample.n)


@dataclass(frozen=True, eq=False)
class CplFit:
    """Pooled common-slope fit with per-subset fixed effects.

    `b1` is the reference (first included) subset's intercept; `betas[j]`
    shifts subset j+2's intercept relative to it. `m` counts included
    subsets, `n_obs` their pooled observations; `n_excluded` subsets fell
    under the minimum-size bar.
    """

    theta: float
    b1: float
    betas: np.ndarray
    rmse: float
    m: int
    n_obs: int
    subset_ids: tuple[int, ...]
    n_excluded: int

    @property
    def intercepts(self) -> np.ndarray:
        return np.concatenate(([self.b1], self.b1 + self.betas))

    def predict(self, subset_pos: int, ranks: np.ndarray) -> np.ndarray:
        """Fitted ln sizes for the subset at included position `subset_pos`."""
        return self.intercepts[subset_pos] - self.theta * np.log(ranks - 0.5)


def fit_cpl(samples: Sequence[RankSizeSample], min_subset_size: int = 2) -> CplFit:
    """Common-slope categorical regression over many rank-size subsets.

    Solved by subset demeaning (within transformation) for the slope, then
    per-subset intercept recovery: O(total observations) regardless of the
    subset count. Subsets smaller than `min_subset_size` are excluded (a
    singleton's fixed effect would absorb its only observation).
    """
    if min_subset_size < 1:
        raise ArgumentError("min_subset_size must be >= 1")
    included = [s for s in samples if s.n >= min_subset_size]
    n_excluded = len(samples) - len(included)
    if not included:
        raise DegenerateFitError(
            f"no subsets of size >= {min_subset_size} to fit"
        )

    sxx = 0.0
    sxy = 0.0
    means = []
    for s in included:
        x = np.log(s.ranks - 0.5)
        y = np.log(s.sizes)
        xc = x - x.mean()
        sxx += float(xc @ xc)
        sxy += float(xc @ (y - y.mean()))
        means.append((float(x.mean()), float(y.mean())))
    if sxx == 0.0:
        raise DegenerateFitError(
            "regressor collinear with subset indicators (all subsets size 1?)"
        )
    slope = sxy / sxx
    theta = -slope

    intercepts = np.array([ym - slope * xm for xm, ym in means])
    ssr = 0.0
    n_obs = 0
    for s, b in zip(included, intercepts):
        pred = b + slope * np.log(s.ranks - 0.5)
        r = np.log(s.sizes) - pred
        ssr += float(r @ r)
        n_obs += s.n
    rmse = float(np.sqrt(ssr / n_obs))

    return CplFit(
        theta=theta,
        b1=float(intercepts[0]),
        betas=intercepts[1:] - intercepts[0],
        rmse=rmse,
        m=len(included),
        n_obs=n_obs,
        subset_ids=tuple(s.subset_id for s in included),
        n_excluded=n_excluded,
    )


def write_ranksize_csv(samples: Sequence[RankSizeSample], fit: CplFit, path) -> None:
    """One row per (included subset, rank) with fitted log sizes from `fit`."""
    by_id = {s.subset_id: s for s in samples}
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(RANKSIZE_CSV_HEADER)
        for pos, sid in enumerate(fit.subset_ids):
            s = by_id[sid]
            fitted = fit.predict(pos, s.ranks)
            for r, size, f in zip(s.ranks, s.sizes, fitted):
                writer.writerow(
                    [
                        sid,
                        int(r),
                        repr(float(size)),
                        repr(float(np.log(r - 0.5))),
                        repr(float(np.log(size))),
                        repr(float(f)),
                    ]
                )
