"""Independence scores and greedy independence curves.

The score of metric m given a set of other metrics is the conditional
variance of its latent score, ``C[m,m] - C[m,G] C[G,G]^-1 C[G,m]``, i.e.
one minus the latent R-squared.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from ..errors import InvalidInput, SingularConditioning

RIDGE = 1e-8
TIE_TOL = 1e-12


def _check_corr(C):
    C = np.asarray(C, dtype=float)
    if C.ndim != 2 or C.shape[0] != C.shape[1]:
        raise InvalidInput("correlation matrix must be square")
    return C


def independence_score(C, m: int, conditioning: Sequence[int]) -> float:
    C = _check_corr(C)
    cond = list(conditioning)
    if m in cond:
        raise InvalidInput("metric cannot be in its own conditioning set")
    if not cond:
        return float(C[m, m])
    A = C[np.ix_(cond, cond)]
    c = C[cond, m]
    try:
        if np.linalg.cond(A) > 1e12:
            raise np.linalg.LinAlgError
        beta = np.linalg.solve(A, c)
    except np.linalg.LinAlgError:
        try:
            beta = np.linalg.solve(A + RIDGE * np.eye(len(cond)), c)
        except np.linalg.LinAlgError:
            raise SingularConditioning("conditioning block is singular even with ridge") from None
    score = float(C[m, m] - c @ beta)
    if not np.isfinite(score):
        raise SingularConditioning("conditioning block is singular even with ridge")
    return min(max(score, 0.0), float(C[m, m]))


@dataclass
class IndependenceCurve:
    """Scores for conditioning sets shrinking from all other metrics to none.

    ``sizes[i]`` is the conditioning-set size for ``values[i]``; sizes run
    from ``len(removed)`` down to 0. ``removed[k]`` is the metric dropped at
    step k, and ``ties`` lists the steps where the choice was broken by name.
    """

    metric: str
    sizes: list
    values: list
    removed: list
    ties: list = field(default_factory=list)

    def rows(self):
        # conditioning set still present after each removal
        for i, (k, v) in enumerate(zip(self.sizes, self.values)):
            yield {"metric": self.metric, "set_size": k, "score": v,
                   "removed": self.removed[i - 1] if i > 0 else ""}


def independence_curve(C, m: int, names: Optional[Sequence[str]] = None) -> IndependenceCurve:
    """Greedy curve: start from every other metric, repeatedly drop the one
    whose removal raises the score the most.

    Candidates are scanned in name order and replaced only on a strict
    increase, so ties go to the lexically smallest name.
    """
    C = _check_corr(C)
    M = C.shape[0]
    if M < 2:
        raise InvalidInput("independence curves need at least 2 metrics")
    names = list(names) if names is not None else [str(i) for i in range(M)]
    current = sorted((q for q in range(M) if q != m), key=lambda q: names[q])
    sizes = [len(current)]
    values = [independence_score(C, m, current)]
    removed, ties = [], []
    while current:
        best, best_score, n_best = None, -np.inf, 0
        for q in current:
            s = independence_score(C, m, [r for r in current if r != q])
            if s > best_score + TIE_TOL:
                best, best_score, n_best = q, s, 1
            elif abs(s - best_score) <= TIE_TOL:
                n_best += 1
        if n_best > 1:
            ties.append(len(removed))
        current.remove(best)
        removed.append(names[best])
        sizes.append(len(current))
        values.append(best_score)
    return IndependenceCurve(names[m], sizes, values, removed, ties)


def independence_scores(C, names: Optional[Sequence[str]] = None) -> dict:
    """Score of each metric given all the others."""
    C = _check_corr(C)
    M = C.shape[0]
    names = list(names) if names is not None else [str(i) for i in range(M)]
    return {names[m]: independence_score(C, m, [q for q in range(M) if q != m]) for m in range(M)}


def independence_bands(draws, m: int, conditioning: Sequence[int], q=(0.05, 0.5, 0.95)) -> list:
    """Quantiles of the score across posterior draws of C."""
    vals = np.array([independence_score(D, m, conditioning) for D in np.asarray(draws)])
    return [float(v) for v in np.quantile(vals, q)]
