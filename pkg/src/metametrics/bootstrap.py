"""Game-resampling bootstrap for the sampling variance of player-season metrics.

For every team-season with G games, a replicate draws G games with
replacement. Each player's lines in a drawn game count once per draw, the
season totals are re-summed, and every metric is re-evaluated. The variance
across replicates estimates the chance variation of each X[s, p, m].

Random streams are keyed by (seed, team-season, replicate), so a replicate
does not depend on which other replicates were computed or in what order.
"""

from __future__ import annotations

import csv
import logging
import zlib
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from ._kernels import group_sums
from .dsl import MetricDefinition
from .errors import InvalidInput
from .gamelog import GameLog, SeasonAggregate
from .tensor import MetricTensor, check_stats, evaluate_cells

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class BootstrapConfig:
    replicates: int = 500
    seed: int = 0
    max_excluded_fraction: float = 0.5

    def __post_init__(self):
        if self.replicates < 2:
            raise InvalidInput("bootstrap needs at least 2 replicates")


@dataclass
class BootstrapVariance:
    seasons: list
    players: list
    metrics: list
    bv: np.ndarray
    replicates_used: np.ndarray
    replicates: int
    seed: int
    warnings: list = field(default_factory=list)

    def to_rows(self):
        S, P, M = self.bv.shape
        for s in range(S):
            for p in range(P):
                for m in range(M):
                    used = int(self.replicates_used[s, p, m])
                    b = self.bv[s, p, m]
                    if used == 0 and np.isnan(b):
                        continue
                    yield (self.seasons[s], self.players[p], self.metrics[m],
                           "" if np.isnan(b) else repr(float(b)), used)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["season", "player_id", "metric", "bv", "replicates_used"])
            w.writerows(self.to_rows())

    @classmethod
    def read_csv(cls, path, tensor: MetricTensor, replicates: int = 0, seed: int = 0):
        """Load a BV table aligned to ``tensor``'s axes."""
        S, P, M = tensor.shape
        bv = np.full((S, P, M), np.nan)
        used = np.zeros((S, P, M), dtype=np.int64)
        si = {s: i for i, s in enumerate(tensor.seasons)}
        pi = {p: i for i, p in enumerate(tensor.players)}
        mi = {m: i for i, m in enumerate(tensor.metrics)}
        with open(path, newline="", encoding="utf-8") as fh:
            for row in csv.DictReader(fh):
                key = (row["season"], row["player_id"], row["metric"])
                if key[0] not in si or key[1] not in pi or key[2] not in mi:
                    continue
                idx = (si[key[0]], pi[key[1]], mi[key[2]])
                bv[idx] = float(row["bv"]) if row["bv"] != "" else np.nan
                used[idx] = int(row["replicates_used"])
        return cls(list(tensor.seasons), list(tensor.players), list(tensor.metrics), bv, used,
                   replicates, seed)

    def select_players(self, player_ids) -> "BootstrapVariance":
        keep = set(player_ids)
        idx = [i for i, p in enumerate(self.players) if p in keep]
        return BootstrapVariance(self.seasons, [self.players[i] for i in idx], self.metrics,
                                 self.bv[:, idx, :], self.replicates_used[:, idx, :],
                                 self.replicates, self.seed, list(self.warnings))

    def select_metrics(self, names) -> "BootstrapVariance":
        idx = [self.metrics.index(n) for n in names]
        return BootstrapVariance(self.seasons, self.players, [self.metrics[i] for i in idx],
                                 self.bv[:, :, idx], self.replicates_used[:, :, idx],
                                 self.replicates, self.seed, list(self.warnings))

    def aligned(self, tensor: MetricTensor) -> np.ndarray:
        """BV array reindexed to ``tensor``'s players and metrics (NaN where absent)."""
        S, P, M = tensor.shape
        out = np.full((S, P, M), np.nan)
        si = {s: i for i, s in enumerate(self.seasons)}
        pi = {p: i for i, p in enumerate(self.players)}
        mi = {m: i for i, m in enumerate(self.metrics)}
        s_idx = [(a, si[s]) for a, s in enumerate(tensor.seasons) if s in si]
        p_idx = [(a, pi[p]) for a, p in enumerate(tensor.players) if p in pi]
        m_idx = [(a, mi[m]) for a, m in enumerate(tensor.metrics) if m in mi]
        if s_idx and p_idx and m_idx:
            ts, ss = zip(*s_idx)
            tp, sp = zip(*p_idx)
            tm, sm = zip(*m_idx)
            out[np.ix_(ts, tp, tm)] = self.bv[np.ix_(ss, sp, sm)]
        return out


def stratum_key(season, team) -> int:
    """Stable 32-bit key for a team-season, independent of log composition."""
    return zlib.crc32(f"{season}\x1f{team}".encode("utf-8"))


class Resampler:
    """Precomputed state for drawing bootstrap replicates from one game log.

    ``derived`` entries are callables ``f(values, attempts, metrics) -> (S, P)``
    evaluated on each replicate's full tensor; they are how a whole
    pipeline (for instance a shrinkage refit) gets bootstrapped.
    """

    def __init__(self, log: GameLog, defs: Sequence[MetricDefinition], seed: int,
                 derived: Sequence = ()):
        self.log = log
        self.defs = list(defs)
        check_stats(log, self.defs)
        self.seed = int(seed)
        self.derived = list(derived)
        needed = set()
        for d in self.defs:
            needed |= d.required_stats
        self.cols = [k for k, s in enumerate(log.stat_names) if s in needed]
        raw = log.stats[:, self.cols]
        self.nan = np.isnan(raw).astype(float)
        self.vals = np.where(np.isnan(raw), 0.0, raw)
        self.stat_names = [log.stat_names[k] for k in self.cols]
        P = len(log.players)
        cell_all = log.season_idx * P + log.player_idx
        self.cells, inv = np.unique(cell_all, return_inverse=True)
        self.inv = inv.astype(np.int64)
        self.keys = [stratum_key(log.seasons[s], log.teams[t])
                     for s, t in zip(log.stratum_season, log.stratum_team)]
        self.n_games_total = int(log.games_per_stratum.sum())
        self.shape = (len(log.seasons), P)

    def game_counts(self, b: int) -> np.ndarray:
        """Multiplicity of every game (global index) in replicate ``b``."""
        counts = np.empty(self.n_games_total)
        lg = self.log
        for t in range(lg.n_strata):
            G = int(lg.games_per_stratum[t])
            rng = np.random.default_rng([self.seed & 0xFFFFFFFFFFFFFFFF, self.keys[t], int(b)])
            draws = rng.integers(0, G, size=G)
            off = int(lg.game_offset[t])
            counts[off:off + G] = np.bincount(draws, minlength=G)
        return counts

    def evaluate(self, weights: Optional[np.ndarray] = None):
        """Full (S, P, M + derived) tensor values for the given line weights."""
        w = np.ones(self.log.n_lines) if weights is None else weights
        n = len(self.cells)
        agg = SeasonAggregate(
            cell=self.cells,
            sums=group_sums(self.inv, w, self.vals, n),
            games=np.bincount(self.inv, weights=w, minlength=n),
            incomplete=group_sums(self.inv, (w > 0).astype(float), self.nan, n) > 0,
            stat_names=self.stat_names,
        )
        values, attempts = evaluate_cells(agg, self.defs)
        S, P = self.shape
        M = len(self.defs)
        X = np.full((S * P, M), np.nan)
        N = np.full((S * P, M), np.nan)
        X[self.cells] = values
        N[self.cells] = attempts
        X = X.reshape(S, P, M)
        N = N.reshape(S, P, M)
        if self.derived:
            names = [d.name for d in self.defs]
            extra = [np.asarray(f(X, N, names), dtype=float) for f in self.derived]
            X = np.concatenate([X] + [e[:, :, None] for e in extra], axis=2)
        return X

    def replicate(self, b: int) -> np.ndarray:
        counts = self.game_counts(b)
        return self.evaluate(counts[self.log.global_game])


def bootstrap_variance(log: GameLog, defs: Sequence[MetricDefinition],
                       config: BootstrapConfig = BootstrapConfig(),
                       derived: Sequence = (), derived_names: Sequence[str] = ()) -> BootstrapVariance:
    """Bootstrap variance BV[s, p, m] for every observed entry.

    Variance uses divisor (replicates_used - 1). A replicate in which an
    entry is undefined (player absent from every drawn game, zero attempts
    drawn) is excluded for that entry only; if more than
    ``config.max_excluded_fraction`` of replicates are excluded the entry's
    BV is missing and a warning is recorded.
    """
    rs = Resampler(log, defs, config.seed, derived)
    ref = rs.evaluate()
    B = config.replicates
    cnt = np.zeros(ref.shape)
    s1 = np.zeros(ref.shape)
    s2 = np.zeros(ref.shape)
    lo = np.full(ref.shape, np.inf)
    hi = np.full(ref.shape, -np.inf)
    shift = np.nan_to_num(ref)
    for b in range(B):
        x = rs.replicate(b)
        ok = ~np.isnan(x)
        d = np.where(ok, x - shift, 0.0)
        cnt += ok
        s1 += d
        s2 += d * d
        lo = np.where(ok, np.minimum(lo, x), lo)
        hi = np.where(ok, np.maximum(hi, x), hi)
    with np.errstate(invalid="ignore", divide="ignore"):
        var = (s2 - s1 * s1 / cnt) / (cnt - 1)
    var = np.maximum(var, 0.0)
    var[hi == lo] = 0.0
    enough = cnt >= max(2, (1.0 - config.max_excluded_fraction) * B)
    observed = ~np.isnan(ref)
    var = np.where(enough & observed, var, np.nan)
    notes = []
    dropped = int(np.sum(observed & ~enough))
    if dropped:
        msg = (f"{dropped} entries lost more than {config.max_excluded_fraction:.0%} of replicates; "
               "their BV is missing")
        notes.append(msg)
        logger.warning(msg)
    metrics = [d.name for d in defs] + list(derived_names or [getattr(f, "name", f"derived{i}")
                                                              for i, f in enumerate(derived)])
    return BootstrapVariance(
        seasons=list(log.seasons),
        players=list(log.players),
        metrics=metrics,
        bv=var,
        replicates_used=np.where(observed, cnt, 0).astype(np.int64),
        replicates=B,
        seed=config.seed,
        warnings=notes,
    )
