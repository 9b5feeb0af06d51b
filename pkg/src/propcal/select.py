"""Pairwise test statistics and the sequential selection rule.

Estimate k is accepted if estimate k-1 was accepted and its standardized
squared distance to every earlier estimate stays below that estimate's
threshold; the selected index is the last accepted one.  All indices in the
public API are 1-based (index k labels the k-th family member).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .errors import DomainError


@dataclass(frozen=True)
class EstimateVector:
    """One realization of the family with its (known) variances."""

    values: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        values = np.ascontiguousarray(np.asarray(self.values, dtype=float))
        v = np.ascontiguousarray(np.asarray(self.v, dtype=float))
        if values.shape != v.shape or values.ndim != 1:
            raise DomainError("values and v must be 1-d arrays of equal length")
        if np.any(v <= 0):
            raise DomainError("variances must be positive")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "v", v)

    @property
    def K(self) -> int:
        return int(self.values.shape[0])


@dataclass(frozen=True)
class PairStats:
    """Table of pairwise statistics t[l, k] = (values_l - values_k)^2 / (2 v_l)
    for l < k (0-based array indices; entries on and below the diagonal are 0).
    """

    t: np.ndarray

    @property
    def K(self) -> int:
        return int(self.t.shape[0])


@dataclass(frozen=True)
class CriticalValues:
    """Thresholds z_1..z_{K-1}; entry l guards comparisons against estimate l.

    +inf entries are allowed (the comparison never rejects).  ``meta`` holds
    calibration provenance (r, alpha, n_replications, seed, design label) or
    the string "manual".
    """

    z: np.ndarray
    meta: Mapping[str, object] | str = "manual"

    def __post_init__(self):
        z = np.ascontiguousarray(np.asarray(self.z, dtype=float))
        if z.ndim != 1 or np.any(np.isnan(z)) or np.any(z < 0):
            raise DomainError("critical values must be nonnegative (inf allowed)")
        object.__setattr__(self, "z", z)

    def __len__(self) -> int:
        return int(self.z.shape[0])


def _z_array(z: CriticalValues | np.ndarray, K: int) -> np.ndarray:
    zz = z.z if isinstance(z, CriticalValues) else np.asarray(z, dtype=float)
    if zz.shape[0] != K - 1:
        raise DomainError(f"expected {K - 1} critical values, got {zz.shape[0]}")
    return zz


def pair_stats(est: EstimateVector) -> PairStats:
    """All pairwise statistics, computed eagerly (O(K^2))."""
    diff2 = (est.values[:, None] - est.values[None, :]) ** 2
    return PairStats(t=np.triu(diff2 / (2.0 * est.v[:, None]), k=1))


def select_index(stats: PairStats, z: CriticalValues | np.ndarray) -> int:
    """Selected index: the largest k such that every pair (l, m) with
    l < m <= k satisfies t[l, m] <= z_l.  Boundary equality accepts.
    Index 1 is always accepted."""
    K = stats.K
    zz = _z_array(z, K)
    khat = 1
    for k in range(1, K):  # 0-based candidate index
        if np.all(stats.t[:k, k] <= zz[:k]):
            khat = k + 1
        else:
            break
    return khat


def stepwise_index(stats: PairStats, z: CriticalValues | np.ndarray, k: int) -> int:
    """Index of the estimate retained after the first k steps: min(khat, k)."""
    if not 1 <= k <= stats.K:
        raise DomainError(f"k must be in [1, {stats.K}]")
    return min(select_index(stats, z), k)


def acceptance_trace(
    stats: PairStats, z: CriticalValues | np.ndarray
) -> tuple[int, int, float, float] | None:
    """First failing pair as (l, m, t_lm, z_l), 1-based, or None if all accept."""
    K = stats.K
    zz = _z_array(z, K)
    for m in range(1, K):
        bad = np.flatnonzero(stats.t[:m, m] > zz[:m])
        if bad.size:
            l = int(bad[0])
            return (l + 1, m + 1, float(stats.t[l, m]), float(zz[l]))
    return None
