"""Weighted empirical distributions with batch-means error bars, and the
distance functions used for the three-way comparisons.

Weights are time weights for time-stationary laws and event counts for
event-embedded laws; either way the distribution is a right-continuous step
CDF on a sorted support.  Batch rows keep non-overlapping sub-estimates so
serially dependent simulation output still yields honest standard errors.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import stats as sps

__all__ = [
    "EmpiricalDistribution",
    "batch_ci",
    "ks_distance",
    "wasserstein1",
]


def batch_ci(values: np.ndarray, confidence: float = 0.95) -> tuple[float, float, float]:
    """(mean, standard error, CI half-width) from non-overlapping batch
    statistics, Student-t critical value."""
    v = np.asarray(values, dtype=float)
    b = v.size
    if b < 2:
        return float(v.mean()) if b else float("nan"), float("nan"), float("nan")
    mean = float(v.mean())
    se = float(v.std(ddof=1) / np.sqrt(b))
    half = float(sps.t.ppf(0.5 + confidence / 2.0, b - 1) * se)
    return mean, se, half


@dataclass
class EmpiricalDistribution:
    """Step CDF on `support` with per-batch weight rows.

    `support` is sorted strictly increasing; `batch_weights` has shape
    (batches, len(support)) with nonnegative entries.  Total weights are
    normalized on query, never stored normalized.
    """

    support: np.ndarray
    batch_weights: np.ndarray

    def __post_init__(self):
        self.support = np.asarray(self.support, dtype=float)
        self.batch_weights = np.atleast_2d(np.asarray(self.batch_weights, dtype=float))
        if self.batch_weights.shape[1] != self.support.size:
            raise ValueError("weights do not align with support")
        if self.support.size == 0 or self.batch_weights.sum() <= 0.0:
            raise ValueError("empty distribution")
        if np.any(np.diff(self.support) <= 0.0):
            raise ValueError("support must be strictly increasing")
        if np.any(self.batch_weights < 0.0):
            raise ValueError("negative weight")

    # -- constructors ------------------------------------------------------

    @staticmethod
    def from_weights(support, weights) -> "EmpiricalDistribution":
        return EmpiricalDistribution(np.asarray(support), np.atleast_2d(weights))

    @staticmethod
    def from_samples(samples, batches: int = 1) -> "EmpiricalDistribution":
        x = np.sort(np.asarray(samples, dtype=float))
        support, inv = np.unique(x, return_inverse=True)
        if batches <= 1:
            w = np.bincount(inv, minlength=support.size).astype(float)
            return EmpiricalDistribution(support, w[None, :])
        # preserve sample order for batching, then count per batch
        raw = np.asarray(samples, dtype=float)
        idx = np.searchsorted(support, raw)
        rows = np.zeros((batches, support.size))
        bounds = np.linspace(0, raw.size, batches + 1).astype(int)
        for b in range(batches):
            sl = idx[bounds[b] : bounds[b + 1]]
            rows[b] = np.bincount(sl, minlength=support.size)
        return EmpiricalDistribution(support, rows)

    @staticmethod
    def merge(parts: Sequence["EmpiricalDistribution"]) -> "EmpiricalDistribution":
        """Stack batch rows over the union support.  Associative and
        commutative up to batch-row order; statistics derived from totals
        are invariant under permutation of `parts`."""
        if not parts:
            raise ValueError("nothing to merge")
        support = parts[0].support
        for p in parts[1:]:
            support = np.union1d(support, p.support)
        rows = []
        for p in parts:
            cols = np.searchsorted(support, p.support)
            w = np.zeros((p.batch_weights.shape[0], support.size))
            w[:, cols] = p.batch_weights
            rows.append(w)
        return EmpiricalDistribution(support, np.vstack(rows))

    # -- queries -----------------------------------------------------------

    @property
    def weights(self) -> np.ndarray:
        return self.batch_weights.sum(axis=0)

    @property
    def total(self) -> float:
        return float(self.batch_weights.sum())

    @property
    def batches(self) -> int:
        return self.batch_weights.shape[0]

    @property
    def probs(self) -> np.ndarray:
        return self.weights / self.total

    @property
    def cdf_values(self) -> np.ndarray:
        """Right-continuous CDF evaluated at the support points."""
        return np.cumsum(self.probs)

    def cdf(self, x) -> np.ndarray:
        idx = np.searchsorted(self.support, np.asarray(x, dtype=float), side="right")
        c = np.concatenate(([0.0], self.cdf_values))
        return c[idx]

    def moment(self, k: int = 1) -> float:
        return float(np.sum(self.probs * self.support**k))

    def mean(self) -> float:
        return self.moment(1)

    def var(self) -> float:
        m = self.mean()
        return self.moment(2) - m * m

    def mass_at(self, x: float) -> float:
        i = np.searchsorted(self.support, x)
        if i < self.support.size and self.support[i] == x:
            return float(self.probs[i])
        return 0.0

    def batch_statistic(self, fn: Callable[[np.ndarray, np.ndarray], float]) -> np.ndarray:
        """fn(support, one batch's weights) per batch, skipping empty rows."""
        out = []
        for row in self.batch_weights:
            if row.sum() > 0.0:
                out.append(fn(self.support, row))
        return np.asarray(out)

    def mean_ci(self, confidence: float = 0.95) -> tuple[float, float, float]:
        per_batch = self.batch_statistic(lambda s, w: float(np.sum(s * w) / w.sum()))
        return batch_ci(per_batch, confidence)

    def cdf_se(self, x) -> np.ndarray:
        """Pointwise batch-means standard error of the CDF at x."""
        xs = np.asarray(x, dtype=float)
        vals = []
        for row in self.batch_weights:
            t = row.sum()
            if t <= 0.0:
                continue
            c = np.concatenate(([0.0], np.cumsum(row) / t))
            vals.append(c[np.searchsorted(self.support, xs, side="right")])
        v = np.vstack(vals)
        return v.std(axis=0, ddof=1) / np.sqrt(v.shape[0])


def ks_distance(dist: EmpiricalDistribution, other) -> float:
    """sup-norm distance between the step CDF and `other`: another
    empirical distribution (compared atom-wise) or a continuous law with a
    vectorized .cdf (compared on both sides of every atom)."""
    if isinstance(other, EmpiricalDistribution):
        pts = np.union1d(dist.support, other.support)
        return float(np.max(np.abs(dist.cdf(pts) - other.cdf(pts))))
    f = other.cdf(dist.support)
    right = dist.cdf_values
    left = np.concatenate(([0.0], right[:-1]))
    return float(np.max(np.maximum(np.abs(right - f), np.abs(f - left))))


def wasserstein1(dist: EmpiricalDistribution, other, grid: int = 8192) -> float:
    """Integral of |CDF difference|.  Exact between two step CDFs; against
    a continuous law it integrates on a dense merged grid (quantiles plus
    support), a documented approximation."""
    if isinstance(other, EmpiricalDistribution):
        pts = np.union1d(dist.support, other.support)
        gaps = np.abs(dist.cdf(pts) - other.cdf(pts))[:-1]
        return float(np.sum(gaps * np.diff(pts)))
    p = (np.arange(grid) + 0.5) / grid
    if hasattr(other, "quantile_many"):
        q = other.quantile_many(p)
    else:
        q = np.asarray([other.quantile(pi) for pi in p])
    pts = np.union1d(dist.support, q)
    f = other.cdf(pts)
    gaps = np.abs(dist.cdf(pts) - f)
    return float(np.sum((gaps[:-1] + gaps[1:]) / 2.0 * np.diff(pts)))
