"""Distance kernels and the feature-subsampling deviation checker."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import pdist

from .dataio import DataMatrix, rescale_unit

__all__ = [
    "DistanceMatrix",
    "METRICS",
    "pairwise",
    "hoeffding_bound",
    "deviation_experiment",
]

METRICS = ("manhattan", "sq_euclidean")
_SCIPY_NAMES = {"manhattan": "cityblock", "sq_euclidean": "sqeuclidean"}


@dataclass(frozen=True)
class DistanceMatrix:
    """Condensed pairwise dissimilarities: row-major upper triangle."""

    n: int
    condensed: np.ndarray

    def __post_init__(self) -> None:
        c = np.asarray(self.condensed, dtype=np.float64)
        object.__setattr__(self, "condensed", c)
        if self.n < 2:
            raise ValueError("need at least 2 points")
        expected = self.n * (self.n - 1) // 2
        if c.shape != (expected,):
            raise ValueError(f"condensed length {c.shape} != n(n-1)/2 = {expected}")
        if not np.all(np.isfinite(c)) or c.min() < 0:
            raise ValueError("distances must be finite and nonnegative")


def pairwise(values: np.ndarray | DataMatrix, metric: str = "manhattan") -> DistanceMatrix:
    """Condensed pairwise distances over the rows of a matrix view.

    manhattan sums |x_ij - x_i'j|; sq_euclidean sums squared differences.
    """
    if metric not in METRICS:
        raise ValueError(f"unknown metric {metric!r}; choose from {METRICS}")
    x = values.values if isinstance(values, DataMatrix) else np.asarray(values, dtype=float)
    if x.ndim != 2 or x.shape[0] < 2 or x.shape[1] < 1:
        raise ValueError("need a 2-D view with >= 2 rows and >= 1 column")
    return DistanceMatrix(x.shape[0], pdist(x, _SCIPY_NAMES[metric]))


def hoeffding_bound(m_feat: int, m_total: int, eps: float) -> float:
    """Worst-case probability that a size-m feature-mean distance deviates by eps.

    Returns min(1, 2 exp(-2 m eps^2 / (1 - (m-1)/M))) for a subsample of
    m features out of M, applicable when per-feature contributions lie in
    [0, 1].
    """
    if not 1 <= m_feat <= m_total:
        raise ValueError(f"need 1 <= m_feat <= m_total, got {m_feat}/{m_total}")
    if eps <= 0:
        raise ValueError("eps must be positive")
    denom = 1.0 - (m_feat - 1) / m_total  # == (M - m + 1)/M, always positive
    return min(1.0, 2.0 * math.exp(-2.0 * m_feat * eps * eps / denom))


def deviation_experiment(
    m: DataMatrix,
    metric: str,
    m_feat: int,
    trials: int,
    eps_grid: list[float],
    seed: int,
) -> list[tuple[float, float, float]]:
    """Empirical exceedance of |d_hat - d_star| for one random row pair.

    The matrix is min-max rescaled first so each per-feature contribution
    (and hence the deviation) lies in [0, 1], the regime where
    hoeffding_bound applies.  d_star is the full-feature mean contribution
    and d_hat the mean over a uniform subsample of ``m_feat`` features,
    redrawn ``trials`` times.

    Returns rows of (eps, empirical exceedance, bound).
    """
    if trials < 100:
        raise ValueError("need at least 100 trials for a meaningful estimate")
    if metric not in METRICS:
        raise ValueError(f"unknown metric {metric!r}; choose from {METRICS}")
    data = rescale_unit(m).values
    n, m_total = data.shape
    if not 1 <= m_feat <= m_total:
        raise ValueError(f"need 1 <= m_feat <= M={m_total}, got {m_feat}")
    if not eps_grid:
        raise ValueError("eps_grid must be nonempty")

    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(0,)))
    i, j = rng.choice(n, size=2, replace=False)
    diff = np.abs(data[i] - data[j])
    contrib = diff if metric == "manhattan" else diff**2
    d_star = contrib.mean()

    # uniform m-subsets per trial: first m slots of a random permutation
    keys = rng.random((trials, m_total))
    idx = np.argpartition(keys, m_feat - 1, axis=1)[:, :m_feat]
    d_hat = contrib[idx].mean(axis=1)
    dev = np.abs(d_hat - d_star)

    return [
        (float(eps), float(np.mean(dev >= eps)), hoeffding_bound(m_feat, m_total, eps))
        for eps in eps_grid
    ]
