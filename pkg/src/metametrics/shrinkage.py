"""Empirical-Bayes beta-binomial shrinkage of percentage metrics.

Each player p has a career rate pi0_p and a concentration r_p; season
abilities are Beta(r_p pi0_p, r_p (1 - pi0_p)) and makes are binomial given
attempts. pi0_p is the attempt-weighted career rate, r_p maximizes the
beta-binomial marginal likelihood of the player's seasons, and the season
estimate is the posterior mean (z + r pi0) / (n + r).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.special import betaln

from .errors import InvalidInput
from .tensor import MetricTensor

LOG_R_BOUNDS = (0.0, np.log(1e6))
GRID_POINTS = 57
LOG_R_TOL = 1e-6
_GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0


@dataclass
class ShrinkageFit:
    career_mean: np.ndarray
    r: np.ndarray
    post_mean: np.ndarray
    post_var: np.ndarray
    z: np.ndarray
    n: np.ndarray
    degenerate: np.ndarray
    players: Optional[list] = None
    seasons: Optional[list] = None

    @property
    def raw(self):
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(self.n > 0, self.z / self.n, np.nan)

    def write_player_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["player_id", "r", "career_mean"])
            for p, (r, c) in enumerate(zip(self.r, self.career_mean)):
                if np.isnan(c):
                    continue
                w.writerow([self.players[p] if self.players else p, repr(float(r)), repr(float(c))])

    def write_season_csv(self, path):
        raw = self.raw
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["season", "player_id", "raw", "shrunk", "n"])
            S, P = self.n.shape
            for s in range(S):
                for p in range(P):
                    if not self.n[s, p] > 0:
                        continue
                    w.writerow([self.seasons[s] if self.seasons else s,
                                self.players[p] if self.players else p,
                                repr(float(raw[s, p])), repr(float(self.post_mean[s, p])),
                                repr(float(self.n[s, p]))])


def marginal_loglik(log_r, z, n, pi0):
    """Beta-binomial log marginal likelihood per player (binomial constants dropped).

    ``log_r`` broadcasts against the player axis; ``z``/``n`` are (S, P) with
    n == 0 marking absent seasons.
    """
    r = np.exp(log_r)
    a = r * pi0
    b = r * (1.0 - pi0)
    valid = n > 0
    zz = np.where(valid, z, 0.0)
    nn = np.where(valid, n, 0.0)
    terms = betaln(zz + a, nn - zz + b) - betaln(a, b)
    return np.where(valid, terms, 0.0).sum(axis=0)


def _fit_log_r(z, n, pi0):
    """Grid search then golden-section refinement of log r, vectorized over players."""
    lo_b, hi_b = LOG_R_BOUNDS
    grid = np.linspace(lo_b, hi_b, GRID_POINTS)
    ll = np.stack([marginal_loglik(g, z, n, pi0) for g in grid])
    best = np.argmax(ll, axis=0)
    P = z.shape[1]
    lo = grid[np.maximum(best - 1, 0)]
    hi = grid[np.minimum(best + 1, GRID_POINTS - 1)]
    x1 = hi - _GOLDEN * (hi - lo)
    x2 = lo + _GOLDEN * (hi - lo)
    f1 = marginal_loglik(x1, z, n, pi0)
    f2 = marginal_loglik(x2, z, n, pi0)
    while np.max(hi - lo) > LOG_R_TOL:
        right = f1 < f2
        lo = np.where(right, x1, lo)
        hi = np.where(right, hi, x2)
        nx1 = np.where(right, x2, hi - _GOLDEN * (hi - lo))
        nx2 = np.where(right, lo + _GOLDEN * (hi - lo), x1)
        nf1 = np.where(right, f2, np.nan)
        nf2 = np.where(right, np.nan, f1)
        need1 = ~right
        need2 = right
        if need1.any():
            nf1 = np.where(need1, marginal_loglik(nx1, z, n, pi0), nf1)
        if need2.any():
            nf2 = np.where(need2, marginal_loglik(nx2, z, n, pi0), nf2)
        x1, x2, f1, f2 = nx1, nx2, nf1, nf2
    x = 0.5 * (lo + hi)
    fx = marginal_loglik(x, z, n, pi0)
    grid_best = grid[best]
    use_grid = ll[best, np.arange(P)] > fx
    return np.where(use_grid, grid_best, x)


def fit_shrinkage(z, n, fixed_r: Optional[float] = None, leave_one_out: bool = False,
                  players=None, seasons=None) -> ShrinkageFit:
    """Fit per-player beta-binomial shrinkage.

    ``z`` and ``n`` are (seasons, players) makes and attempts; seasons with
    n == 0 (or NaN) are skipped. Every player needs at least one season with
    attempts. ``fixed_r`` bypasses the likelihood fit (0 reproduces the raw
    rate). With ``leave_one_out`` each season shrinks toward the career rate
    of the player's other seasons (falling back to the full career rate for
    single-season players).
    """
    z = np.atleast_2d(np.asarray(z, dtype=float))
    n = np.atleast_2d(np.asarray(n, dtype=float))
    if z.shape != n.shape:
        raise InvalidInput("z and n must have the same shape")
    valid = ~np.isnan(n) & (n > 0) & ~np.isnan(z)
    z = np.where(valid, z, 0.0)
    n = np.where(valid, n, 0.0)
    if np.any(z < 0) or np.any(z > n + 1e-9):
        raise InvalidInput("makes must satisfy 0 <= z <= n")
    tot_n = n.sum(axis=0)
    if np.any(tot_n <= 0):
        raise InvalidInput("every player needs at least one season with attempts")
    tot_z = z.sum(axis=0)
    pi0 = tot_z / tot_n
    degenerate = (pi0 <= 0) | (pi0 >= 1)
    if fixed_r is not None:
        if fixed_r < 0:
            raise InvalidInput("r must be nonnegative")
        r = np.full(pi0.shape, float(fixed_r))
    else:
        r = np.full(pi0.shape, np.exp(LOG_R_BOUNDS[1]))
        ok = ~degenerate
        if ok.any():
            r[ok] = np.exp(_fit_log_r(z[:, ok], n[:, ok], pi0[ok]))
    center = np.broadcast_to(pi0, z.shape)
    if leave_one_out:
        rest_n = tot_n[None, :] - n
        with np.errstate(invalid="ignore", divide="ignore"):
            center = np.where(rest_n > 0, (tot_z[None, :] - z) / rest_n, pi0[None, :])
    a = z + r * center
    b = n - z + r * (1.0 - center)
    post_mean = np.where(valid, a / (a + b), np.nan)
    with np.errstate(invalid="ignore", divide="ignore"):
        post_var = np.where(valid, a * b / ((a + b) ** 2 * (a + b + 1.0)), np.nan)
    return ShrinkageFit(pi0, r, post_mean, post_var, np.where(valid, z, np.nan),
                        np.where(valid, n, 0.0), degenerate, players, seasons)


def makes_and_attempts(X: MetricTensor, metric: str):
    m = X.metric_index(metric)
    if X.kinds[m] != "percentage":
        raise InvalidInput(f"metric {metric!r} is not a percentage metric")
    n = X.attempts[:, :, m]
    z = X.values[:, :, m] * n
    return z, n


def fit_tensor(X: MetricTensor, metric: str, **kwargs) -> ShrinkageFit:
    """Fit on one percentage column; players without attempts stay missing."""
    z, n = makes_and_attempts(X, metric)
    has = np.nansum(np.where(n > 0, n, 0.0), axis=0) > 0
    S, P = z.shape
    sub = fit_shrinkage(z[:, has], n[:, has], **kwargs)
    full = {
        "career_mean": np.full(P, np.nan), "r": np.full(P, np.nan),
        "post_mean": np.full((S, P), np.nan), "post_var": np.full((S, P), np.nan),
        "z": np.full((S, P), np.nan), "n": np.zeros((S, P)), "degenerate": np.zeros(P, dtype=bool),
    }
    for k in ("career_mean", "r", "degenerate"):
        full[k][has] = getattr(sub, k)
    for k in ("post_mean", "post_var", "z", "n"):
        full[k][:, has] = getattr(sub, k)
    return ShrinkageFit(players=list(X.players), seasons=list(X.seasons), **full)


def shrunken_metric(X: MetricTensor, fit: ShrinkageFit, name: str, source: Optional[str] = None) -> MetricTensor:
    """Append the posterior means as a new percentage column."""
    attempts = np.where(fit.n > 0, fit.n, np.nan)
    return X.with_column(name, fit.post_mean, kind="percentage", attempts=attempts)


class ShrinkageColumn:
    """Bootstrap hook: refit shrinkage on each replicate's tensor."""

    def __init__(self, source: str, name: Optional[str] = None, **fit_kwargs):
        self.source = source
        self.name = name or f"{source} EB"
        self.fit_kwargs = fit_kwargs

    def __call__(self, values, attempts, metrics: Sequence[str]):
        m = list(metrics).index(self.source)
        n = attempts[:, :, m]
        z = values[:, :, m] * n
        has = np.nansum(np.where(n > 0, n, 0.0), axis=0) > 0
        out = np.full(n.shape, np.nan)
        if has.any():
            out[:, has] = fit_shrinkage(z[:, has], n[:, has], **self.fit_kwargs).post_mean
        return out
