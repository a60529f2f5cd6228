"""Principal components of the latent correlation matrix and PC metrics."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from ..errors import InvalidInput


@dataclass
class PCDecomposition:
    metrics: list
    eigenvalues: np.ndarray
    U: np.ndarray
    F: np.ndarray

    def loadings_rows(self):
        for i, name in enumerate(self.metrics):
            yield [name] + [float(v) for v in self.U[i]]


def canonical_signs(U: np.ndarray) -> np.ndarray:
    """Flip each column so its largest-magnitude entry is positive."""
    U = U.copy()
    idx = np.argmax(np.abs(U), axis=0)
    signs = np.sign(U[idx, np.arange(U.shape[1])])
    signs[signs == 0] = 1.0
    return U * signs


def pca(C, metrics: Optional[Sequence[str]] = None) -> PCDecomposition:
    C = np.asarray(C, dtype=float)
    if C.ndim != 2 or C.shape[0] != C.shape[1] or not np.allclose(C, C.T, atol=1e-10):
        raise InvalidInput("PCA needs a symmetric matrix")
    w, V = np.linalg.eigh(0.5 * (C + C.T))
    order = np.argsort(w, kind="stable")[::-1]
    w = w[order]
    U = canonical_signs(V[:, order])
    # negative eigenvalues are rounding noise on a PSD input
    lam = np.maximum(w, 0.0)
    F = np.cumsum(lam) / np.sum(lam)
    names = list(metrics) if metrics is not None else [f"M{i + 1}" for i in range(C.shape[0])]
    return PCDecomposition(names, w, U, F)


def pc_scores(Z: np.ndarray, U: np.ndarray):
    """``W = Z U`` with missing latent entries imputed as 0.

    Returns ``(W, imputed)`` where ``imputed`` flags rows that had any
    missing input. ``Z`` may be (N, M) or (S, P, M).
    """
    Z = np.asarray(Z, dtype=float)
    miss = np.isnan(Z)
    W = np.where(miss, 0.0, Z) @ U
    imputed = miss.any(axis=-1)
    everything_missing = miss.all(axis=-1)
    W[everything_missing] = np.nan
    return W, imputed


def rank_players(W: np.ndarray, k: int, seasons: Sequence[str], players: Sequence[str],
                 season_filter: Optional[Sequence[str]] = None, top: Optional[int] = None) -> list:
    """Player-seasons ordered by component ``k`` score, descending.

    ``W`` is (S, P, K). Ties are broken by player id, then season.
    """
    W = np.asarray(W, dtype=float)
    if not 0 <= k < W.shape[-1]:
        raise InvalidInput(f"component {k} out of range")
    keep = set(season_filter) if season_filter is not None else None
    rows = []
    for s, season in enumerate(seasons):
        if keep is not None and season not in keep:
            continue
        for p, player in enumerate(players):
            v = W[s, p, k]
            if not np.isnan(v):
                rows.append((season, player, float(v)))
    rows.sort(key=lambda r: (-r[2], r[1], r[0]))
    return rows[:top] if top else rows
