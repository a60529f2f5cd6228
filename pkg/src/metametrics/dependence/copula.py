"""Gaussian copula correlation from rank constraints (extended rank likelihood).

The sampler alternates two steps:

1. every latent score ``Z[i, j]`` of an observed entry is redrawn from its
   normal full conditional, truncated to lie between the latent scores of
   the neighbouring distinct values of column j, so the latent order always
   agrees with the observed order; missing entries are redrawn without
   truncation;
2. the covariance is redrawn from its inverse-Wishart full conditional
   given Z, and stored rescaled to a correlation matrix.

Within a column, levels (distinct observed values) are updated in two
interleaved halves: even levels given odd ones, then odd given even. Each
half only depends on the other, so this is an exact blocked Gibbs step and
vectorizes.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.special import log_ndtr, ndtri, ndtri_exp
from scipy.stats import invwishart, rankdata

from .._kernels import level_extrema
from ..errors import InvalidInput
from ..tensor import MetricTensor

logger = logging.getLogger(__name__)

EIG_FLOOR = -1e-8


@dataclass
class LatentCorrelation:
    metrics: list
    C: np.ndarray
    draws: np.ndarray
    iterations: int
    burnin: int
    thin: int
    seed: int
    n_rows: int
    floor_triggered: int = 0
    warnings: list = field(default_factory=list)

    def to_json_dict(self, include_draws: bool = True) -> dict:
        d = {
            "metrics": list(self.metrics),
            "C": self.C.tolist(),
            "settings": {"iterations": self.iterations, "burnin": self.burnin, "thin": self.thin,
                         "seed": self.seed, "prior": "inverse-Wishart(identity, M + 2)"},
            "n_rows": self.n_rows,
            "n_draws": int(self.draws.shape[0]),
            "floor_triggered": self.floor_triggered,
            "warnings": list(self.warnings),
        }
        if include_draws:
            d["draws"] = self.draws.tolist()
        return d

    @classmethod
    def from_json_dict(cls, d: dict) -> "LatentCorrelation":
        st = d.get("settings", {})
        C = np.asarray(d["C"], dtype=float)
        draws = np.asarray(d.get("draws") or [d["C"]], dtype=float)
        return cls(list(d["metrics"]), C, draws, int(st.get("iterations", 0)),
                   int(st.get("burnin", 0)), int(st.get("thin", 1)), int(st.get("seed", 0)),
                   int(d.get("n_rows", 0)), int(d.get("floor_triggered", 0)), list(d.get("warnings", [])))

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json_dict(), fh)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "LatentCorrelation":
        with open(path, encoding="utf-8") as fh:
            return cls.from_json_dict(json.load(fh))


def to_correlation(S: np.ndarray) -> np.ndarray:
    d = np.sqrt(np.diag(S))
    C = S / np.outer(d, d)
    C = 0.5 * (C + C.T)
    np.fill_diagonal(C, 1.0)
    return C


def project_psd(C: np.ndarray, floor: float = 0.0) -> np.ndarray:
    """Clip eigenvalues at ``floor`` and restore the unit diagonal."""
    w, V = np.linalg.eigh(0.5 * (C + C.T))
    S = (V * np.maximum(w, floor)) @ V.T
    return to_correlation(S)


def rtruncnorm(rng, mu, sd, lower, upper):
    """Draw N(mu, sd^2) truncated to [lower, upper], elementwise.

    Inverse-CDF in log space on the lower tail: intervals in the upper half
    are mirrored first, so no draw loses precision far out in a tail.
    """
    a = (lower - mu) / sd
    b = (upper - mu) / sd
    flip = a > 0
    a2 = np.where(flip, -b, a)
    b2 = np.where(flip, -a, b)
    u = rng.random(np.shape(mu))
    la = log_ndtr(a2)
    lb = log_ndtr(b2)
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        x = ndtri_exp(lb + np.log(u + (1.0 - u) * np.exp(la - lb)))
    x = np.clip(x, a2, b2)
    x = np.where(flip, -x, x)
    return mu + sd * x


class _Column:
    """Rank structure of one observed column."""

    def __init__(self, col: np.ndarray):
        self.obs = np.nonzero(~np.isnan(col))[0]
        self.miss = np.nonzero(np.isnan(col))[0]
        vals = col[self.obs]
        uniq, codes = np.unique(vals, return_inverse=True)
        self.n_levels = len(uniq)
        self.codes = codes.astype(np.int64)
        self.order = np.argsort(self.codes, kind="stable")
        self.starts = np.searchsorted(self.codes[self.order], np.arange(self.n_levels + 1)).astype(np.int64)
        self.color = [self.obs[self.codes % 2 == c] for c in (0, 1)]
        self.color_codes = [self.codes[self.codes % 2 == c] for c in (0, 1)]
        self.avg_rank = rankdata(vals, method="average")


def _as_matrix(X):
    if isinstance(X, MetricTensor):
        S, P, M = X.shape
        flat = X.values.reshape(S * P, M)
        keep = ~np.all(np.isnan(flat), axis=1)
        return flat[keep], list(X.metrics)
    arr = np.asarray(X, dtype=float)
    if arr.ndim != 2:
        raise InvalidInput("expected a (rows, metrics) matrix or a MetricTensor")
    return arr, [f"M{j + 1}" for j in range(arr.shape[1])]


def fit_copula(X, iterations: int = 2000, burnin: int = 500, thin: int = 5, seed: int = 0,
               metrics=None) -> LatentCorrelation:
    """Posterior of the latent correlation matrix from ranks only.

    ``X`` is a MetricTensor (rows are player-seasons) or an (N, M) array
    with NaN for missing values. The prior on the covariance is
    inverse-Wishart with identity scale and M + 2 degrees of freedom.
    """
    Y, names = _as_matrix(X)
    if metrics is not None:
        names = list(metrics)
    N, M = Y.shape
    if not (iterations > burnin >= 0):
        raise InvalidInput("need iterations > burnin >= 0")
    if thin < 1:
        raise InvalidInput("thin must be positive")
    settings = dict(iterations=iterations, burnin=burnin, thin=thin, seed=seed, n_rows=N)
    if M == 1:
        return LatentCorrelation(names, np.ones((1, 1)), np.ones((1, 1, 1)), **settings)
    if M < 1 or N < 2:
        raise InvalidInput("need at least 2 rows and 1 metric")
    cols = [_Column(Y[:, j]) for j in range(M)]
    for j, c in enumerate(cols):
        if c.n_levels < 2:
            raise InvalidInput(f"metric {names[j]!r} has fewer than 2 distinct observed values")

    rng = np.random.default_rng(seed)
    Z = np.empty((N, M))
    for j, c in enumerate(cols):
        Z[c.obs, j] = ndtri(c.avg_rank / (len(c.obs) + 1))
        Z[c.miss, j] = rng.standard_normal(len(c.miss))
    n0 = M + 2
    S0 = np.eye(M)
    Sigma = np.cov(Z, rowvar=False)
    draws = []
    floor_hits = 0
    for it in range(1, iterations + 1):
        Q = np.linalg.inv(Sigma)
        for j, c in enumerate(cols):
            others = np.arange(M) != j
            sd = 1.0 / np.sqrt(Q[j, j])
            mu = -(Z[:, others] @ Q[others, j]) / Q[j, j]
            for color in (0, 1):
                rows = c.color[color]
                if rows.size == 0:
                    continue
                hi, lo = level_extrema(Z[c.obs[c.order], j], c.starts)
                lower = np.concatenate(([-np.inf], hi[:-1]))
                upper = np.concatenate((lo[1:], [np.inf]))
                codes = c.color_codes[color]
                Z[rows, j] = rtruncnorm(rng, mu[rows], sd, lower[codes], upper[codes])
            if c.miss.size:
                Z[c.miss, j] = mu[c.miss] + sd * rng.standard_normal(c.miss.size)
        scale = n0 * S0 + Z.T @ Z
        Sigma = np.atleast_2d(invwishart.rvs(df=n0 + N, scale=scale, random_state=rng))
        if it > burnin and (it - burnin) % thin == 0:
            C = to_correlation(Sigma)
            if np.linalg.eigvalsh(C).min() < EIG_FLOOR:
                floor_hits += 1
                C = project_psd(C)
            draws.append(C)
    if not draws:
        raise InvalidInput("no posterior draws retained; check iterations, burnin and thin")
    draws = np.array(draws)
    C_mean = to_correlation(draws.mean(axis=0))
    if np.linalg.eigvalsh(C_mean).min() < EIG_FLOOR:
        C_mean = project_psd(C_mean)
    notes = []
    if floor_hits > 0.01 * len(draws):
        msg = f"eigenvalue floor applied to {floor_hits} of {len(draws)} draws"
        notes.append(msg)
        logger.warning(msg)
    return LatentCorrelation(names, C_mean, draws, floor_triggered=floor_hits, warnings=notes, **settings)
