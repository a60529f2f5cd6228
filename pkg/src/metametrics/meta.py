"""Discrimination and stability of metrics.

Both scores are variance ratios. Discrimination compares the average
bootstrap variance of a season's values with the spread between players in
that season; stability compares each player's season-to-season spread with
the overall spread, after subtracting sampling noise from both.
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field
from typing import Callable, Iterable, Optional, Sequence, Union

import numpy as np

from .errors import DegenerateSeason, InsufficientData, InvalidInput, NoiseDominates
from .tensor import MetricTensor


@dataclass(frozen=True)
class MixedEffectsParams:
    """Variance components of the additive season/player model."""

    mu: float = 0.0
    sigma2_SM: float = 0.0
    sigma2_PM: float = 0.0
    sigma2_SPM: float = 0.0
    tau2: float = 0.0

    def __post_init__(self):
        for name in ("sigma2_SM", "sigma2_PM", "sigma2_SPM", "tau2"):
            v = getattr(self, name)
            if not np.isfinite(v) or v < 0:
                raise InvalidInput(f"{name} must be a nonnegative finite number, got {v}")


def closed_form_D(params: MixedEffectsParams) -> float:
    """(s2_PM + s2_SPM) / (s2_PM + s2_SPM + tau2)."""
    signal = params.sigma2_PM + params.sigma2_SPM
    den = signal + params.tau2
    if den <= 0:
        raise InvalidInput("discrimination undefined: between-player variance is zero")
    return signal / den


def closed_form_S(params: MixedEffectsParams) -> float:
    """s2_PM / (s2_PM + s2_SM + s2_SPM)."""
    den = params.sigma2_PM + params.sigma2_SM + params.sigma2_SPM
    if den <= 0:
        raise InvalidInput("stability undefined: noise-free variance is zero")
    return params.sigma2_PM / den


def discrimination_1d(x: np.ndarray, bv: np.ndarray) -> float:
    """Discrimination of one season's values ``x`` with bootstrap variances ``bv``.

    Uses population moments over the players where both are present.
    """
    x = np.asarray(x, dtype=float)
    bv = np.asarray(bv, dtype=float)
    ok = ~np.isnan(x) & ~np.isnan(bv)
    if ok.sum() < 2:
        raise InsufficientData("discrimination needs at least 2 observed players")
    xs = x[ok]
    spread = np.mean((xs - xs.mean()) ** 2)
    if not spread > 0:
        raise DegenerateSeason("no between-player variation in season")
    return float(1.0 - np.mean(bv[ok]) / spread)


def _as_arrays(X, BV):
    values = X.values if isinstance(X, MetricTensor) else np.asarray(X, dtype=float)
    if BV is None:
        raise InvalidInput("bootstrap variances are required")
    bv = BV.aligned(X) if hasattr(BV, "aligned") and isinstance(X, MetricTensor) else np.asarray(BV, float)
    if bv.shape != values.shape:
        raise InvalidInput(f"BV shape {bv.shape} does not match X shape {values.shape}")
    return values, bv


def discrimination(X, BV, s: int, m: int) -> float:
    values, bv = _as_arrays(X, BV)
    try:
        return discrimination_1d(values[s, :, m], bv[s, :, m])
    except DegenerateSeason as exc:
        raise DegenerateSeason(f"{exc} (season index {s}, metric index {m})") from None


def stability_2d(x: np.ndarray, bv: np.ndarray, ddof: int = 1) -> float:
    """Raw stability from a (season, player) slice.

    Only players observed in at least two seasons enter either sum. The
    default ``ddof=1`` gives the per-player and overall spreads unbiased
    divisors; ``ddof=0`` is the plug-in form with population divisors, which
    overstates stability by roughly a factor (S_p - 1) / S_p on the
    within-player spread when players have few seasons.
    """
    x = np.asarray(x, dtype=float)
    bv = np.asarray(bv, dtype=float)
    ok = ~np.isnan(x) & ~np.isnan(bv)
    n_seasons = ok.sum(axis=0)
    eligible = n_seasons >= 2
    if eligible.sum() < 2:
        raise InsufficientData("stability needs at least 2 players with 2 or more seasons")
    ok = ok & eligible[None, :]
    x, bv, ok = x[:, eligible], bv[:, eligible], ok[:, eligible]
    sp = ok.sum(axis=0).astype(float)
    xz = np.where(ok, x, 0.0)
    pmean = xz.sum(axis=0) / sp
    within = np.where(ok, (x - pmean) ** 2, 0.0).sum(axis=0) / (sp - ddof)
    bv_p = np.where(ok, bv, 0.0).sum(axis=0) / sp
    numerator = float(np.mean(within - bv_p))
    xs = x[ok]
    total = np.sum((xs - xs.mean()) ** 2) / (xs.size - ddof)
    denominator = float(total - np.mean(bv[ok]))
    if not denominator > 0:
        raise NoiseDominates("sampling variance is at least the total variance")
    return 1.0 - numerator / denominator


def stability(X, BV, m: int, ddof: int = 1) -> tuple:
    """(raw, clamped) stability of metric index ``m``."""
    values, bv = _as_arrays(X, BV)
    raw = stability_2d(values[:, :, m], bv[:, :, m], ddof=ddof)
    return raw, float(np.clip(raw, 0.0, 1.0))


@dataclass
class MetaScore:
    metric: str
    D_by_season: dict
    D_mean: float
    D_mean_clamped: float
    D_by_season_clamped: dict
    S_raw: float
    S_clamped: float
    n_players: int
    n_seasons: int
    counts_by_season: dict = field(default_factory=dict)

    def to_dict(self):
        def clean(v):
            if isinstance(v, float) and np.isnan(v):
                return None
            return v

        d = asdict(self)
        for k in ("D_by_season", "D_by_season_clamped"):
            d[k] = {s: clean(v) for s, v in d[k].items()}
        for k in ("D_mean", "D_mean_clamped", "S_raw", "S_clamped"):
            d[k] = clean(d[k])
        return d


def score_metric(X: MetricTensor, bv: np.ndarray, m: int, ddof: int = 1,
                 require_stability: bool = False) -> MetaScore:
    values = X.values[:, :, m]
    b = bv[:, :, m]
    ok = ~np.isnan(values) & ~np.isnan(b)
    counts = ok.sum(axis=1)
    d_by = {}
    for s, season in enumerate(X.seasons):
        if counts[s] >= 2:
            try:
                d_by[season] = discrimination_1d(values[s], b[s])
            except DegenerateSeason:
                raise DegenerateSeason(
                    f"metric {X.metrics[m]!r} has no between-player variation in season {season}"
                ) from None
        else:
            d_by[season] = float("nan")
    qualifying = [v for v in d_by.values() if not np.isnan(v)]
    if not qualifying:
        raise InsufficientData(f"metric {X.metrics[m]!r}: no season has 2 observed players")
    d_mean = float(np.mean(qualifying))
    try:
        s_raw = stability_2d(values, b, ddof=ddof)
    except (InsufficientData, NoiseDominates):
        if require_stability:
            raise
        s_raw = float("nan")
    return MetaScore(
        metric=X.metrics[m],
        D_by_season=d_by,
        D_mean=d_mean,
        D_mean_clamped=float(np.clip(d_mean, 0, 1)),
        D_by_season_clamped={k: float(np.clip(v, 0, 1)) if not np.isnan(v) else v for k, v in d_by.items()},
        S_raw=s_raw,
        S_clamped=float(np.clip(s_raw, 0, 1)) if not np.isnan(s_raw) else s_raw,
        n_players=int(ok.any(axis=0).sum()),
        n_seasons=int((counts >= 2).sum()),
        counts_by_season={k: int(c) for k, c in zip(X.seasons, counts)},
    )


def meta_scores(X: MetricTensor, BV, metrics: Optional[Sequence[str]] = None,
                ddof: int = 1) -> list:
    """Score every metric (or the named subset) of ``X``."""
    _, bv = _as_arrays(X, BV)
    names = list(metrics) if metrics is not None else list(X.metrics)
    return [score_metric(X, bv, X.metric_index(n), ddof=ddof) for n in names]


PlayerFilter = Union[Iterable[str], Callable[[str], bool]]


def conditional_scores(X: MetricTensor, BV, player_filter: PlayerFilter,
                       metrics: Optional[Sequence[str]] = None, ddof: int = 1) -> list:
    """Meta-metrics recomputed on the subset of players kept by the filter."""
    if callable(player_filter):
        keep = [p for p in X.players if player_filter(p)]
    else:
        wanted = set(player_filter)
        keep = [p for p in X.players if p in wanted]
    if not keep:
        raise InvalidInput("player filter is empty")
    if len(keep) < 2:
        raise InsufficientData("player filter must retain at least 2 players")
    _, bv = _as_arrays(X, BV)
    idx = [X.players.index(p) for p in keep]
    sub = X.select_players(keep)
    return meta_scores(sub, bv[:, idx, :], metrics=metrics, ddof=ddof)


def write_meta_csv(scores: Sequence[MetaScore], seasons: Sequence[str], path) -> None:
    def fmt(v):
        return "" if v is None or (isinstance(v, float) and np.isnan(v)) else repr(float(v))

    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["metric", "D_mean"] + [f"D_{s}" for s in seasons]
                   + ["S_raw", "S_clamped", "n_players", "n_seasons"])
        for sc in scores:
            w.writerow([sc.metric, fmt(sc.D_mean)] + [fmt(sc.D_by_season.get(s)) for s in seasons]
                       + [fmt(sc.S_raw), fmt(sc.S_clamped), sc.n_players, sc.n_seasons])


def write_meta_json(scores: Sequence[MetaScore], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump([s.to_dict() for s in scores], fh, indent=1)
        fh.write("\n")
