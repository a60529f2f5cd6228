"""The season x player x metric array and its construction from game logs."""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .dsl import MetricDefinition
from .errors import InvalidInput, UnknownStat
from .gamelog import GameLog, SeasonAggregate, aggregate

DEFAULT_EXPOSURE_STAT = "MIN"


@dataclass
class MetricTensor:
    """``values[s, p, m]`` with NaN marking missing entries.

    ``attempts`` carries n for percentage metrics (NaN elsewhere) and
    ``exposure`` minutes per (season, player) when the log has them.
    """

    seasons: list
    players: list
    metrics: list
    values: np.ndarray
    kinds: list = None
    attempts: Optional[np.ndarray] = None
    exposure: Optional[np.ndarray] = None
    player_names: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        S, P, M = len(self.seasons), len(self.players), len(self.metrics)
        if self.values.shape != (S, P, M):
            raise InvalidInput(f"values shape {self.values.shape} != {(S, P, M)}")
        if self.kinds is None:
            self.kinds = ["total"] * M
        if len(self.kinds) != M:
            raise InvalidInput("one kind per metric required")
        if self.attempts is None:
            self.attempts = np.full((S, P, M), np.nan)
        if self.exposure is None:
            self.exposure = np.full((S, P), np.nan)
        self.attempts = np.asarray(self.attempts, dtype=float)
        self.exposure = np.asarray(self.exposure, dtype=float)

    @property
    def shape(self):
        return self.values.shape

    @property
    def mask(self) -> np.ndarray:
        """True where an entry is observed."""
        return ~np.isnan(self.values)

    def metric_index(self, name: str) -> int:
        try:
            return self.metrics.index(name)
        except ValueError:
            raise InvalidInput(f"unknown metric {name!r}") from None

    def column(self, name: str) -> np.ndarray:
        return self.values[:, :, self.metric_index(name)]

    def n_observed(self) -> np.ndarray:
        """N_sm: observed players per (season, metric)."""
        return self.mask.sum(axis=1)

    def select_metrics(self, names: Sequence[str]) -> "MetricTensor":
        idx = [self.metric_index(n) for n in names]
        return replace(
            self,
            metrics=[self.metrics[i] for i in idx],
            kinds=[self.kinds[i] for i in idx],
            values=self.values[:, :, idx],
            attempts=self.attempts[:, :, idx],
            warnings=list(self.warnings),
        )

    def select_players(self, player_ids) -> "MetricTensor":
        keep = set(player_ids)
        idx = [i for i, p in enumerate(self.players) if p in keep]
        if not idx:
            raise InvalidInput("player filter retains no players")
        return replace(
            self,
            players=[self.players[i] for i in idx],
            values=self.values[:, idx, :],
            attempts=self.attempts[:, idx, :],
            exposure=self.exposure[:, idx],
            player_names={p: n for p, n in self.player_names.items() if p in keep},
            warnings=list(self.warnings),
        )

    def with_column(self, name, values, kind="percentage", attempts=None) -> "MetricTensor":
        if name in self.metrics:
            raise InvalidInput(f"metric {name!r} already present")
        S, P, _ = self.shape
        att = np.full((S, P), np.nan) if attempts is None else attempts
        return replace(
            self,
            metrics=self.metrics + [name],
            kinds=self.kinds + [kind],
            values=np.concatenate([self.values, np.asarray(values, float)[:, :, None]], axis=2),
            attempts=np.concatenate([self.attempts, np.asarray(att, float)[:, :, None]], axis=2),
            warnings=list(self.warnings),
        )

    def to_json_dict(self) -> dict:
        def nested(a):
            return [[[None if np.isnan(v) else float(v) for v in row] for row in plane] for plane in a]

        return {
            "seasons": list(self.seasons),
            "players": list(self.players),
            "metrics": list(self.metrics),
            "kinds": list(self.kinds),
            "player_names": dict(self.player_names),
            "values": nested(self.values),
            "attempts": nested(self.attempts),
            "exposure": [[None if np.isnan(v) else float(v) for v in row] for row in self.exposure],
            "warnings": list(self.warnings),
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "MetricTensor":
        def arr(x):
            return np.array([[[np.nan if v is None else v for v in row] for row in plane] for plane in x],
                            dtype=float)

        S, P, M = len(d["seasons"]), len(d["players"]), len(d["metrics"])
        values = arr(d["values"]).reshape(S, P, M)
        attempts = arr(d["attempts"]).reshape(S, P, M) if d.get("attempts") is not None else None
        exposure = None
        if d.get("exposure") is not None:
            exposure = np.array([[np.nan if v is None else v for v in row] for row in d["exposure"]],
                                dtype=float).reshape(S, P)
        return cls(
            seasons=list(d["seasons"]),
            players=list(d["players"]),
            metrics=list(d["metrics"]),
            values=values,
            kinds=list(d.get("kinds") or ["total"] * M),
            attempts=attempts,
            exposure=exposure,
            player_names=dict(d.get("player_names") or {}),
            warnings=list(d.get("warnings") or []),
        )

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json_dict(), fh, indent=1)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "MetricTensor":
        with open(path, encoding="utf-8") as fh:
            return cls.from_json_dict(json.load(fh))

    def equals(self, other: "MetricTensor") -> bool:
        return (
            self.seasons == other.seasons
            and self.players == other.players
            and self.metrics == other.metrics
            and self.kinds == other.kinds
            and np.array_equal(self.values, other.values, equal_nan=True)
            and np.array_equal(self.attempts, other.attempts, equal_nan=True)
            and np.array_equal(self.exposure, other.exposure, equal_nan=True)
        )


def check_stats(log: GameLog, defs: Sequence[MetricDefinition]) -> None:
    have = set(log.stat_names)
    for d in defs:
        missing = d.required_stats - have
        if missing:
            raise UnknownStat(f"metric {d.name!r} needs stats {sorted(missing)} not in the game log")


def evaluate_cells(agg: SeasonAggregate, defs: Sequence[MetricDefinition]):
    """Evaluate every definition on aggregated rows.

    Returns ``(values, attempts)`` as (rows, metrics) arrays. Rows with no
    games, or whose attempts stat was absent from some game line, are NaN.
    """
    cols = {s: agg.sums[:, k] for k, s in enumerate(agg.stat_names)}
    inc = {s: agg.incomplete[:, k] for k, s in enumerate(agg.stat_names)}
    played = agg.games > 0
    n = len(agg.cell)
    values = np.full((n, len(defs)), np.nan)
    attempts = np.full((n, len(defs)), np.nan)
    for m, d in enumerate(defs):
        v = d.evaluate(cols)
        v = np.broadcast_to(v, (n,)).astype(float)
        ok = played.copy()
        if d.attempts_stat is not None:
            att = cols[d.attempts_stat]
            ok &= ~inc[d.attempts_stat]
            attempts[:, m] = np.where(ok, att, np.nan)
            if d.kind == "percentage":
                ok &= att > 0
        values[:, m] = np.where(ok, v, np.nan)
    return values, attempts


def aggregate_and_evaluate(log: GameLog, defs: Sequence[MetricDefinition],
                           exposure_stat: str = DEFAULT_EXPOSURE_STAT) -> MetricTensor:
    """Season-aggregate the log and evaluate each metric per (season, player).

    Entries whose formula divides by zero become missing and produce a
    warning; they never abort the run.
    """
    defs = list(defs)
    if not defs:
        raise InvalidInput("no metric definitions")
    check_stats(log, defs)
    agg = aggregate(log)
    values, attempts = evaluate_cells(agg, defs)
    S, P, M = len(log.seasons), len(log.players), len(defs)
    X = np.full((S * P, M), np.nan)
    N = np.full((S * P, M), np.nan)
    X[agg.cell] = values
    N[agg.cell] = attempts
    exposure = np.full(S * P, np.nan)
    if exposure_stat in log.stat_index:
        exposure[agg.cell] = agg.column(exposure_stat)
    notes = []
    for m, d in enumerate(defs):
        bad = int(np.sum(np.isnan(values[:, m])))
        if bad:
            msg = f"{d.name}: {bad} player-season entries undefined (division by zero or missing attempts)"
            notes.append(msg)
            warnings.warn(msg, RuntimeWarning, stacklevel=2)
    return MetricTensor(
        seasons=list(log.seasons),
        players=list(log.players),
        metrics=[d.name for d in defs],
        kinds=[d.kind for d in defs],
        values=X.reshape(S, P, M),
        attempts=N.reshape(S, P, M),
        exposure=exposure.reshape(S, P),
        player_names=dict(log.player_names),
        warnings=notes,
    )


def apply_exposure_filter(tensor: MetricTensor, rate_min: float = 500.0,
                          total_min: float = 0.0) -> MetricTensor:
    """Mask entries whose season exposure is below the threshold for their kind.

    Percentage metrics use the rate threshold. Without exposure data the
    tensor is returned unchanged.
    """
    if np.all(np.isnan(tensor.exposure)):
        return tensor
    values = tensor.values.copy()
    attempts = tensor.attempts.copy()
    for m, kind in enumerate(tensor.kinds):
        thr = total_min if kind == "total" else rate_min
        if thr <= 0:
            continue
        low = ~(tensor.exposure >= thr)
        values[:, :, m][low] = np.nan
        attempts[:, :, m][low] = np.nan
    return replace(tensor, values=values, attempts=attempts, warnings=list(tensor.warnings))


def parse_player_filter(expr: str, tensor: MetricTensor) -> list:
    """Resolve a filter expression to the player ids it keeps.

    Forms: ``all``, ``ids:a,b,c``, ``file:<path>`` (one id per line) and
    ``min_seasons:<k>`` (players observed in at least k seasons).
    """
    expr = (expr or "all").strip()
    if expr == "all":
        return list(tensor.players)
    kind, _, arg = expr.partition(":")
    if kind == "ids":
        ids = [a.strip() for a in arg.split(",") if a.strip()]
    elif kind == "file":
        with open(arg, encoding="utf-8") as fh:
            ids = [ln.strip() for ln in fh if ln.strip() and not ln.startswith("#")]
    elif kind == "min_seasons":
        k = int(arg)
        seen = np.any(tensor.mask, axis=2).sum(axis=0)
        ids = [p for p, c in zip(tensor.players, seen) if c >= k]
    else:
        raise InvalidInput(f"unknown player filter {expr!r}")
    keep = set(ids)
    return [p for p in tensor.players if p in keep]
