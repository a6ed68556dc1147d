"""Greedy radius-ball clustering of embedding rows."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist


class DegenerateClusteringWarning(UserWarning):
    """Fewer than k non-empty balls could be extracted."""


@dataclass(frozen=True)
class GreedyConfig:
    k: int
    r: float

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be at least 1")
        if not self.r > 0:
            raise ValueError("radius must be positive")

    @classmethod
    def from_mu(cls, k: int, n: int, mu: float = 0.5) -> "GreedyConfig":
        """Radius ``mu * sqrt(k / n)``."""
        return cls(k=k, r=mu * np.sqrt(k / n))


def _within_radius(rows: np.ndarray, r: float, block: int = 1024) -> np.ndarray:
    n = rows.shape[0]
    out = np.empty((n, n), dtype=bool)
    for s in range(0, n, block):
        out[s:s + block] = cdist(rows[s:s + block], rows) < r
    return out


def count_ball(rows: np.ndarray, u: int, S, r: float) -> int:
    """Number of ``v`` in ``S`` with ``||rows[v] - rows[u]|| < r`` (``u`` included)."""
    S = np.asarray(sorted(S), dtype=np.int64)
    if u not in set(S.tolist()):
        raise ValueError(f"node {u} is not in S")
    d = cdist(rows[[u]], rows[S])[0]
    return int(np.count_nonzero(d < r))


def greedy_cluster(rows: np.ndarray, config: GreedyConfig) -> np.ndarray:
    """Cluster rows into ``config.k`` groups by repeatedly removing the
    densest open ball of radius ``r``.

    Each round picks the remaining node whose ball contains the most
    remaining nodes (lowest index on ties) and labels that ball. Nodes left
    after ``k`` rounds go to the ball with the smallest mean distance.
    Returns labels in ``1..k``.
    """
    rows = np.asarray(rows, dtype=np.float64)
    if rows.ndim != 2:
        raise ValueError("rows must be a 2-d array")
    n, k = rows.shape[0], config.k
    if n < k:
        raise ValueError(f"need at least k={k} rows, got {n}")
    if not np.all(np.isfinite(rows)):
        raise ValueError("rows must be finite")

    near = _within_radius(rows, config.r)
    labels = np.zeros(n, dtype=np.int64)
    remaining = np.arange(n)
    balls: list[np.ndarray] = []
    for i in range(1, k + 1):
        if remaining.size == 0:
            warnings.warn(f"only {len(balls)} of {k} clusters are non-empty",
                          DegenerateClusteringWarning, stacklevel=2)
            break
        sub = near[np.ix_(remaining, remaining)]
        center = int(np.argmax(sub.sum(axis=1)))
        ball = remaining[sub[center]]
        labels[ball] = i
        balls.append(ball)
        remaining = remaining[~sub[center]]

    if remaining.size:
        means = np.full((remaining.size, k), np.inf)
        for i, ball in enumerate(balls):
            means[:, i] = cdist(rows[remaining], rows[ball]).mean(axis=1)
        labels[remaining] = np.argmin(means, axis=1) + 1
    return labels
