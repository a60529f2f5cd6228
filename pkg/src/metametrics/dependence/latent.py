"""Normal scores of metric values via per-metric empirical CDFs."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri
from scipy.stats import rankdata

from ..errors import DegenerateMetric
from ..tensor import MetricTensor


@dataclass
class LatentScores:
    """``Z[s, p, m]`` on the standard normal scale, NaN where X is missing."""

    seasons: list
    players: list
    metrics: list
    Z: np.ndarray

    def rows(self):
        """(N, M) matrix of player-seasons with any observed metric, plus their (s, p) index."""
        S, P, M = self.Z.shape
        flat = self.Z.reshape(S * P, M)
        keep = ~np.all(np.isnan(flat), axis=1)
        s_idx, p_idx = np.divmod(np.nonzero(keep)[0], P)
        return flat[keep], s_idx, p_idx


def normal_scores(column: np.ndarray, name: str = "") -> np.ndarray:
    """Map observed values to ``ndtri(rank / (n + 1))``; ties share the average rank."""
    col = np.asarray(column, dtype=float)
    out = np.full(col.shape, np.nan)
    obs = ~np.isnan(col)
    vals = col[obs]
    if np.unique(vals).size < 2:
        raise DegenerateMetric(f"metric {name!r} needs at least 2 distinct observed values")
    out[obs] = ndtri(rankdata(vals, method="average") / (vals.size + 1))
    return out


def latent_scores(X: MetricTensor) -> LatentScores:
    S, P, M = X.shape
    Z = np.empty((S, P, M))
    for m in range(M):
        Z[:, :, m] = normal_scores(X.values[:, :, m].reshape(-1), X.metrics[m]).reshape(S, P)
    return LatentScores(list(X.seasons), list(X.players), list(X.metrics), Z)
