"""Synthetic leagues with known ground truth.

Four generators:

* ``mixed_effects`` - per-game values from the additive season/player model,
  with the sampling noise spread over G games so that the season mean has
  variance tau2 and the bootstrap has something honest to estimate.
* ``binomial_league`` - per-game makes and attempts for a shooting
  percentage, with player abilities drawn from Beta distributions.
* ``copula`` - a metric tensor whose latent Gaussian scores have a known
  correlation matrix, pushed through configurable marginals.
* ``box_score`` - a small multi-stat league (shooting splits, rebounds,
  assists, turnovers, minutes) driven by correlated latent player skills.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import stats as sps

from .dsl import parse_definitions
from .errors import InvalidInput
from .gamelog import GameLog, write_game_log
from .meta import MixedEffectsParams, closed_form_D, closed_form_S
from .tensor import MetricTensor

KINDS = ("mixed_effects", "binomial_league", "copula", "box_score")
MARGINALS = ("normal", "uniform", "lognormal", "counts")


@dataclass
class SynthSpec:
    kind: str
    players: int = 100
    seasons: int = 5
    games: int = 20
    seed: int = 0
    teams: Optional[int] = None
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidInput(f"unknown synthetic model {self.kind!r}")
        for name in ("players", "seasons", "games"):
            if int(getattr(self, name)) < 1:
                raise InvalidInput(f"{name} must be positive")
        if self.teams is not None and not 1 <= self.teams <= self.players:
            raise InvalidInput("teams must be between 1 and the number of players")


@dataclass
class SynthResult:
    spec: SynthSpec
    truth: dict
    log: Optional[GameLog] = None
    definitions: str = ""
    tensor: Optional[MetricTensor] = None

    @property
    def defs(self):
        return parse_definitions(self.definitions)

    def write(self, outdir, prefix="synth"):
        from pathlib import Path

        out = Path(outdir)
        out.mkdir(parents=True, exist_ok=True)
        paths = {}
        if self.log is not None:
            paths["logs"] = out / f"{prefix}_logs.csv"
            write_game_log(self.log, paths["logs"])
        if self.definitions:
            paths["metrics"] = out / f"{prefix}_metrics.txt"
            paths["metrics"].write_text(self.definitions, encoding="utf-8")
        if self.tensor is not None:
            paths["tensor"] = out / f"{prefix}_tensor.json"
            self.tensor.save(paths["tensor"])
        paths["truth"] = out / f"{prefix}_truth.json"
        with open(paths["truth"], "w", encoding="utf-8") as fh:
            json.dump(self.truth, fh, indent=1, sort_keys=True)
            fh.write("\n")
        return paths


def _ids(prefix, n):
    width = len(str(n))
    return [f"{prefix}{i:0{width}d}" for i in range(n)]


def _team_log(rng, P, S, G, n_teams, per_game_stats, participate=None):
    """Assemble a columnar log where every team member plays every team game.

    ``per_game_stats`` maps stat name -> (S, P, G) array. ``participate`` is
    an optional (S, P) boolean mask of player-seasons that exist.
    """
    seasons = [str(2000 + s) for s in range(S)]
    players = _ids("p", P)
    teams = _ids("T", n_teams)
    team_of = np.empty((S, P), dtype=np.int64)
    for s in range(S):
        perm = rng.permutation(P)
        team_of[s, perm] = np.arange(P) % n_teams
    if participate is None:
        participate = np.ones((S, P), dtype=bool)
    s_idx, p_idx = np.nonzero(participate)
    n_sp = len(s_idx)
    season_idx = np.repeat(s_idx, G)
    player_idx = np.repeat(p_idx, G)
    game = np.tile(np.arange(G), n_sp)
    team_idx = team_of[season_idx, player_idx]
    game_ids = np.array([f"g{g:03d}" for g in range(G)], dtype=object)[game]
    names = list(per_game_stats)
    stats = np.empty((n_sp * G, len(names)))
    for k, nm in enumerate(names):
        stats[:, k] = per_game_stats[nm][s_idx, p_idx, :].reshape(-1)
    return GameLog(
        seasons=seasons,
        players=players,
        teams=teams,
        stat_names=names,
        season_idx=season_idx,
        player_idx=player_idx,
        team_idx=team_idx,
        game_ids=game_ids,
        stats=stats,
        player_names={p: f"Player {p[1:]}" for p in players},
    )


def _mixed_effects(spec: SynthSpec, rng) -> SynthResult:
    pr = dict(spec.params)
    params = MixedEffectsParams(
        mu=float(pr.get("mu", 0.0)),
        sigma2_SM=float(pr.get("sigma2_SM", 1.0)),
        sigma2_PM=float(pr.get("sigma2_PM", 2.0)),
        sigma2_SPM=float(pr.get("sigma2_SPM", 1.0)),
        tau2=float(pr.get("tau2", 1.0)),
    )
    participation = float(pr.get("participation", 1.0))
    P, S, G = spec.players, spec.seasons, spec.games
    z_s = rng.normal(0.0, np.sqrt(params.sigma2_SM), S)
    z_p = rng.normal(0.0, np.sqrt(params.sigma2_PM), P)
    z_sp = rng.normal(0.0, np.sqrt(params.sigma2_SPM), (S, P))
    # per-game noise with variance G * tau2 averages to tau2 over the season
    eps = rng.normal(0.0, np.sqrt(G * params.tau2), (S, P, G))
    true_mean = params.mu + z_s[:, None] + z_p[None, :] + z_sp
    game_vals = true_mean[:, :, None] + eps
    participate = rng.random((S, P)) < participation if participation < 1 else None
    n_teams = spec.teams or max(1, P // 15)
    log = _team_log(
        rng, P, S, G, n_teams,
        {
            "POS": np.maximum(game_vals, 0.0),
            "NEG": np.maximum(-game_vals, 0.0),
            "GP": np.ones((S, P, G)),
        },
        participate,
    )
    X = game_vals.mean(axis=2)
    if participate is not None:
        X = np.where(participate, X, np.nan)
    truth = {
        "kind": "mixed_effects",
        "params": {
            "mu": params.mu,
            "sigma2_SM": params.sigma2_SM,
            "sigma2_PM": params.sigma2_PM,
            "sigma2_SPM": params.sigma2_SPM,
            "tau2": params.tau2,
        },
        "D": closed_form_D(params) if params.sigma2_PM + params.sigma2_SPM + params.tau2 > 0 else None,
        "S": closed_form_S(params) if params.sigma2_PM + params.sigma2_SM + params.sigma2_SPM > 0 else None,
        "season_effects": z_s.tolist(),
    }
    tensor = MetricTensor(
        seasons=log.seasons, players=log.players, metrics=["X"], kinds=["rate"],
        values=X[:, :, None], player_names=dict(log.player_names),
    )
    return SynthResult(spec, truth, log, "X rate = (POS - NEG) / GP\n", tensor)


def _binomial_league(spec: SynthSpec, rng) -> SynthResult:
    pr = dict(spec.params)
    a0 = float(pr.get("ability_a", 20.0))
    b0 = float(pr.get("ability_b", 20.0))
    r = pr.get("r")
    attempts = float(pr.get("attempts", 100))
    fixed = pr.get("attempts_dist", "fixed") == "fixed"
    minutes = float(pr.get("minutes_per_game", 30.0))
    P, S, G = spec.players, spec.seasons, spec.games
    career = rng.beta(a0, b0, P)
    if r is None:
        pi = np.broadcast_to(career, (S, P)).copy()
    else:
        r = float(r)
        pi = rng.beta(r * career[None, :] * np.ones((S, 1)), r * (1 - career)[None, :] * np.ones((S, 1)))
    if fixed:
        per_game = attempts / G
        if not float(per_game).is_integer():
            raise InvalidInput("fixed attempts must be divisible by the number of games")
        att = np.full((S, P, G), per_game)
    else:
        att = rng.poisson(attempts / G, (S, P, G)).astype(float)
    makes = rng.binomial(att.astype(np.int64), pi[:, :, None]).astype(float)
    n_teams = spec.teams or max(1, P // 15)
    log = _team_log(
        rng, P, S, G, n_teams,
        {"FG3M": makes, "FG3A": att, "GP": np.ones((S, P, G)), "MIN": np.full((S, P, G), minutes)},
    )
    z = makes.sum(axis=2)
    n = att.sum(axis=2)
    with np.errstate(invalid="ignore", divide="ignore"):
        raw = np.where(n > 0, z / n, np.nan)
    var_pi = a0 * b0 / ((a0 + b0) ** 2 * (a0 + b0 + 1))
    e_pq = a0 * b0 / ((a0 + b0) * (a0 + b0 + 1))
    truth = {
        "kind": "binomial_league",
        "params": {"ability_a": a0, "ability_b": b0, "r": r, "attempts": attempts,
                   "attempts_dist": "fixed" if fixed else "poisson"},
        "career_mean": career.tolist(),
        "pi": pi.tolist(),
        # population discrimination of the raw percentage when pi is constant over seasons
        "D_raw_population": var_pi / (var_pi + e_pq / attempts) if r is None else None,
    }
    tensor = MetricTensor(
        seasons=log.seasons, players=log.players, metrics=["3P%"], kinds=["percentage"],
        values=raw[:, :, None], attempts=n[:, :, None], player_names=dict(log.player_names),
    )
    defs = "3P% percentage attempts=FG3A = FG3M / FG3A\n"
    return SynthResult(spec, truth, log, defs, tensor)


def _transform(z, marginal):
    u = sps.norm.cdf(z)
    if marginal == "normal":
        return z
    if marginal == "uniform":
        return u
    if marginal == "lognormal":
        return np.exp(z)
    if marginal == "counts":
        return sps.poisson.ppf(u, 3.0)
    raise InvalidInput(f"unknown marginal {marginal!r}")


def _copula(spec: SynthSpec, rng) -> SynthResult:
    pr = dict(spec.params)
    C = np.asarray(pr.get("C", np.eye(int(pr.get("metrics", 3)))), dtype=float)
    M = C.shape[0]
    if C.shape != (M, M) or not np.allclose(C, C.T) or not np.allclose(np.diag(C), 1.0):
        raise InvalidInput("C must be a symmetric unit-diagonal matrix")
    if np.linalg.eigvalsh(C).min() < -1e-10:
        raise InvalidInput("C must be positive semidefinite")
    marg = pr.get("marginals", "normal")
    marginals = [marg] * M if isinstance(marg, str) else list(marg)
    if len(marginals) != M:
        raise InvalidInput("one marginal per metric required")
    P, S = spec.players, spec.seasons
    Z = rng.multivariate_normal(np.zeros(M), C, size=S * P, method="eigh")
    X = np.column_stack([_transform(Z[:, j], marginals[j]) for j in range(M)])
    missing = float(pr.get("missing", 0.0))
    if missing > 0:
        X = np.where(rng.random(X.shape) < missing, np.nan, X)
    names = list(pr.get("names") or [f"M{j + 1}" for j in range(M)])
    players = _ids("p", P)
    tensor = MetricTensor(
        seasons=[str(2000 + s) for s in range(S)], players=players, metrics=names,
        kinds=["total"] * M, values=X.reshape(S, P, M),
    )
    truth = {"kind": "copula", "C": C.tolist(), "marginals": marginals, "metrics": names,
             "latent": Z.reshape(S, P, M).tolist() if pr.get("keep_latent") else None}
    return SynthResult(spec, truth, None, "", tensor)


SKILLS = ("scoring", "shooting", "inside", "playmaking")
_SKILL_CORR = np.array([
    [1.0, 0.3, 0.1, 0.2],
    [0.3, 1.0, -0.4, 0.1],
    [0.1, -0.4, 1.0, -0.3],
    [0.2, 0.1, -0.3, 1.0],
])

BOX_SCORE_METRICS = """\
PTS = 2 * FGM + FG3M + FTM
REB = REB
AST = AST
PTS36 rate = 36 * (2 * FGM + FG3M + FTM) / MIN
REB36 rate = 36 * REB / MIN
AST36 rate = 36 * AST / MIN
TOV36 rate = 36 * TOV / MIN
STL36 rate = 36 * STL / MIN
BLK36 rate = 36 * BLK / MIN
FG% percentage attempts=FGA = FGM / FGA
3P% percentage attempts=FG3A = FG3M / FG3A
FT% percentage attempts=FTA = FTM / FTA
"""


def _expit(x):
    return 1.0 / (1.0 + np.exp(-x))


def _logit(p):
    return np.log(p / (1.0 - p))


def _box_score(spec: SynthSpec, rng) -> SynthResult:
    pr = dict(spec.params)
    drift = float(pr.get("season_drift", 0.3))
    P, S, G = spec.players, spec.seasons, spec.games
    skills = rng.multivariate_normal(np.zeros(4), _SKILL_CORR, size=P)
    u = skills[None, :, :] + drift * rng.standard_normal((S, P, 4))
    score, shoot, inside, play = (u[:, :, k][:, :, None] for k in range(4))
    level = 12.0 + 24.0 * sps.norm.cdf(rng.normal(0.5 * skills[:, 0], 0.8, P))
    minutes = np.clip(rng.normal(level[None, :, None], 4.0, (S, P, G)), 1.0, 48.0)
    per = minutes / 36.0

    def counts(log_rate):
        return rng.poisson(np.exp(log_rate) * per)

    fga = counts(np.log(12.0) + 0.3 * score)
    fg3a = rng.binomial(fga, _expit(-1.0 + 0.8 * shoot))
    fg3m = rng.binomial(fg3a, _expit(_logit(0.35) + 0.25 * shoot))
    fg2m = rng.binomial(fga - fg3a, _expit(_logit(0.48) + 0.2 * inside))
    fta = counts(np.log(4.0) + 0.4 * inside)
    ftm = rng.binomial(fta, _expit(_logit(0.75) + 0.4 * shoot))
    stats = {
        "MIN": minutes,
        "FGA": fga, "FGM": fg2m + fg3m, "FG3A": fg3a, "FG3M": fg3m, "FTA": fta, "FTM": ftm,
        "REB": counts(np.log(7.0) + 0.45 * inside),
        "AST": counts(np.log(3.5) + 0.5 * play),
        "TOV": counts(np.log(2.0) + 0.3 * play + 0.1 * score),
        "STL": counts(np.log(1.2) + 0.3 * play),
        "BLK": counts(np.log(0.8) + 0.5 * inside),
        "GP": np.ones((S, P, G)),
    }
    stats = {k: np.asarray(v, dtype=float) for k, v in stats.items()}
    n_teams = spec.teams or max(1, P // 15)
    log = _team_log(rng, P, S, G, n_teams, stats)
    truth = {
        "kind": "box_score",
        "params": {"season_drift": drift},
        "skills": list(SKILLS),
        "skill_correlation": _SKILL_CORR.tolist(),
        "player_skills": skills.tolist(),
    }
    return SynthResult(spec, truth, log, BOX_SCORE_METRICS, None)


_GENERATORS = {
    "mixed_effects": _mixed_effects,
    "binomial_league": _binomial_league,
    "copula": _copula,
    "box_score": _box_score,
}


def generate(spec: SynthSpec) -> SynthResult:
    rng = np.random.default_rng(spec.seed)
    result = _GENERATORS[spec.kind](spec, rng)
    result.truth["spec"] = {
        "kind": spec.kind, "players": spec.players, "seasons": spec.seasons,
        "games": spec.games, "seed": spec.seed, "teams": spec.teams,
    }
    return result
