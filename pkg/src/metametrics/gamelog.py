"""Per-game box-score lines and their season aggregates."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np
import pandas as pd

from ._kernels import group_sums
from .errors import InvalidInput

ID_COLUMNS = ("season", "player_id", "player_name", "team", "game_id")


@dataclass(frozen=True)
class PlayerGameLine:
    season: str
    player: str
    team: str
    game: str
    stats: Mapping[str, float]
    player_name: str = ""


def _id_sort_key(value: str):
    try:
        return (0, float(value), value)
    except ValueError:
        return (1, 0.0, value)


def sorted_ids(values: Iterable[str]) -> list:
    return sorted(set(values), key=_id_sort_key)


@dataclass
class GameLog:
    """Columnar game log.

    ``stats`` is a (lines, stats) float array with NaN for stats absent from
    a line. Index arrays point into ``seasons``/``players``/``teams``.
    ``stratum`` numbers team-seasons and ``game`` numbers the games inside
    each team-season (0..G-1), which is what the bootstrap resamples.
    """

    seasons: list
    players: list
    teams: list
    stat_names: list
    season_idx: np.ndarray
    player_idx: np.ndarray
    team_idx: np.ndarray
    game_ids: np.ndarray
    stats: np.ndarray
    player_names: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.stats.shape[0] == 0:
            raise InvalidInput("game log is empty")
        finite = self.stats[~np.isnan(self.stats)]
        if not np.all(np.isfinite(finite)) or np.any(finite < 0):
            raise InvalidInput("stat values must be finite and nonnegative")
        self.stat_index = {s: k for k, s in enumerate(self.stat_names)}
        T = len(self.teams)
        ts_key = self.season_idx.astype(np.int64) * T + self.team_idx
        uniq, self.stratum = np.unique(ts_key, return_inverse=True)
        self.stratum = self.stratum.astype(np.int64)
        self.n_strata = len(uniq)
        self.stratum_season = (uniq // T).astype(np.int64)
        self.stratum_team = (uniq % T).astype(np.int64)
        # game index within each stratum
        gkey = pd.MultiIndex.from_arrays([self.stratum, self.game_ids])
        gcodes, guniq = pd.factorize(gkey, sort=True)
        g_stratum = np.asarray(guniq.get_level_values(0), dtype=np.int64)
        first = np.searchsorted(g_stratum, np.arange(self.n_strata))
        self.game = (gcodes - first[self.stratum]).astype(np.int64)
        self.global_game = gcodes.astype(np.int64)
        self.games_per_stratum = np.bincount(g_stratum, minlength=self.n_strata).astype(np.int64)
        self.game_offset = first.astype(np.int64)
        key = pd.MultiIndex.from_arrays([self.season_idx, self.player_idx, self.stratum, self.game_ids])
        if key.has_duplicates:
            raise InvalidInput("duplicate (season, player, team, game) line")

    @property
    def n_lines(self) -> int:
        return self.stats.shape[0]

    def __len__(self):
        return self.n_lines

    @classmethod
    def from_frame(cls, df: pd.DataFrame) -> "GameLog":
        missing = [c for c in ("season", "player_id", "team", "game_id") if c not in df.columns]
        if missing:
            raise InvalidInput(f"game log is missing columns {missing}")
        if len(df) == 0:
            raise InvalidInput("game log is empty")
        ids = {c: df[c].astype(str).str.strip() for c in ("season", "player_id", "team", "game_id")}
        # canonical line order keeps every float reduction independent of file order
        keys = [pd.factorize(ids[c], sort=True)[0] for c in ("game_id", "team", "player_id", "season")]
        order = np.lexsort(keys)
        df = df.iloc[order].reset_index(drop=True)
        ids = {c: v.iloc[order].reset_index(drop=True) for c, v in ids.items()}
        stat_cols = [c for c in df.columns if c not in ID_COLUMNS]
        try:
            stats = df[stat_cols].apply(pd.to_numeric, errors="raise").to_numpy(dtype=float)
        except (ValueError, TypeError) as exc:
            raise InvalidInput(f"non-numeric stat value: {exc}") from None
        seasons = sorted_ids(ids["season"])
        players = sorted_ids(ids["player_id"])
        teams = sorted_ids(ids["team"])
        smap = {s: i for i, s in enumerate(seasons)}
        pmap = {p: i for i, p in enumerate(players)}
        tmap = {t: i for i, t in enumerate(teams)}
        names = {}
        if "player_name" in df.columns:
            names = dict(zip(ids["player_id"], df["player_name"].fillna("").astype(str)))
        return cls(
            seasons=seasons,
            players=players,
            teams=teams,
            stat_names=list(stat_cols),
            season_idx=ids["season"].map(smap).to_numpy(np.int64),
            player_idx=ids["player_id"].map(pmap).to_numpy(np.int64),
            team_idx=ids["team"].map(tmap).to_numpy(np.int64),
            game_ids=ids["game_id"].to_numpy(dtype=object),
            stats=np.ascontiguousarray(stats, dtype=float).reshape(len(df), len(stat_cols)),
            player_names=names,
        )

    @classmethod
    def from_lines(cls, lines: Sequence[PlayerGameLine]) -> "GameLog":
        lines = list(lines)
        if not lines:
            raise InvalidInput("game log is empty")
        stat_names = []
        seen = set()
        for ln in lines:
            for k in ln.stats:
                if k not in seen:
                    seen.add(k)
                    stat_names.append(k)
        rows = []
        for ln in lines:
            row = {
                "season": ln.season,
                "player_id": ln.player,
                "player_name": ln.player_name,
                "team": ln.team,
                "game_id": ln.game,
            }
            row.update({k: ln.stats.get(k, np.nan) for k in stat_names})
            rows.append(row)
        return cls.from_frame(pd.DataFrame(rows, columns=list(ID_COLUMNS) + stat_names))

    def to_frame(self) -> pd.DataFrame:
        df = pd.DataFrame(
            {
                "season": np.asarray(self.seasons, dtype=object)[self.season_idx],
                "player_id": np.asarray(self.players, dtype=object)[self.player_idx],
                "player_name": [self.player_names.get(self.players[i], "") for i in self.player_idx],
                "team": np.asarray(self.teams, dtype=object)[self.team_idx],
                "game_id": self.game_ids,
            }
        )
        for k, s in enumerate(self.stat_names):
            df[s] = self.stats[:, k]
        return df

    def lines(self):
        """Iterate as :class:`PlayerGameLine` records (slow; for inspection)."""
        for i in range(self.n_lines):
            yield PlayerGameLine(
                season=self.seasons[self.season_idx[i]],
                player=self.players[self.player_idx[i]],
                team=self.teams[self.team_idx[i]],
                game=str(self.game_ids[i]),
                stats={s: float(self.stats[i, k]) for k, s in enumerate(self.stat_names)
                       if not np.isnan(self.stats[i, k])},
                player_name=self.player_names.get(self.players[self.player_idx[i]], ""),
            )

    def select_players(self, player_ids) -> "GameLog":
        keep_ids = set(player_ids)
        mask = np.array([self.players[i] in keep_ids for i in self.player_idx], dtype=bool)
        if not mask.any():
            raise InvalidInput("player filter removed every line")
        return GameLog.from_frame(self.to_frame()[mask].reset_index(drop=True))


def read_game_log(path) -> GameLog:
    df = pd.read_csv(
        path,
        dtype={c: str for c in ID_COLUMNS},
        keep_default_na=False,
        na_values=[""],
        float_precision="round_trip",
        encoding="utf-8",
    )
    return GameLog.from_frame(df)


def write_game_log(log: GameLog, path) -> None:
    log.to_frame().to_csv(path, index=False, encoding="utf-8", float_format="%.17g", lineterminator="\n")


@dataclass
class SeasonAggregate:
    """Summed counting stats per observed (season, player).

    ``cell`` holds the flat index ``s * n_players + p`` for each row.
    ``incomplete`` marks stats that were absent from at least one of the
    constituent game lines.
    """

    cell: np.ndarray
    sums: np.ndarray
    games: np.ndarray
    incomplete: np.ndarray
    stat_names: list

    def column(self, name):
        return self.sums[:, self.stat_names.index(name)]


def aggregate(log: GameLog, weights: Optional[np.ndarray] = None,
              stat_cols: Optional[Sequence[int]] = None) -> SeasonAggregate:
    """Sum stats per (season, player), optionally with per-line weights.

    With ``weights`` (bootstrap multiplicities) a cell whose weights are all
    zero is reported with ``games == 0``.
    """
    P = len(log.players)
    cell_all = log.season_idx * P + log.player_idx
    cells, inv = np.unique(cell_all, return_inverse=True)
    inv = inv.astype(np.int64)
    cols = list(range(len(log.stat_names))) if stat_cols is None else list(stat_cols)
    raw = log.stats[:, cols]
    nan = np.isnan(raw)
    vals = np.where(nan, 0.0, raw)
    w = np.ones(log.n_lines) if weights is None else np.asarray(weights, dtype=float)
    sums = group_sums(inv, w, vals, len(cells))
    games = np.bincount(inv, weights=w, minlength=len(cells))
    incomplete = group_sums(inv, (w > 0).astype(float), nan.astype(float), len(cells)) > 0
    return SeasonAggregate(cells, sums, games, incomplete, [log.stat_names[c] for c in cols])
