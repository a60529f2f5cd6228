import json

import numpy as np
import pytest

from metametrics.dependence import latent_scores
from metametrics.errors import InvalidInput
from metametrics.synth import SynthSpec, generate
from metametrics.tensor import aggregate_and_evaluate


def test_seed_determinism():
    a = generate(SynthSpec("mixed_effects", players=30, seasons=3, games=5, seed=4))
    b = generate(SynthSpec("mixed_effects", players=30, seasons=3, games=5, seed=4))
    c = generate(SynthSpec("mixed_effects", players=30, seasons=3, games=5, seed=5))
    assert np.array_equal(a.log.stats, b.log.stats)
    assert a.truth == b.truth
    assert not np.array_equal(a.log.stats, c.log.stats)


def test_mixed_effects_moments():
    s2_sm, s2_pm, s2_spm, tau2 = 1.0, 2.0, 1.0, 1.0
    P, S, G = 5000, 5, 4
    res = generate(SynthSpec("mixed_effects", players=P, seasons=S, games=G, seed=0,
                             params=dict(sigma2_SM=s2_sm, sigma2_PM=s2_pm, sigma2_SPM=s2_spm, tau2=tau2)))
    X = res.tensor.values[:, :, 0]
    agg = aggregate_and_evaluate(res.log, res.defs)
    assert np.allclose(agg.values[:, :, 0], X, rtol=0, atol=1e-12)
    within_season = X.var(axis=1).mean()
    assert within_season == pytest.approx(s2_pm + s2_spm + tau2, rel=0.05)
    player_means = X.mean(axis=0)
    assert player_means.var() == pytest.approx(s2_pm + (s2_spm + tau2) / S, rel=0.05)
    # per-game noise carries G * tau2 so the season mean carries tau2
    games = res.log.stats[:, 0] - res.log.stats[:, 1]
    cell = res.log.season_idx * P + res.log.player_idx
    order = np.argsort(cell, kind="stable")
    per_cell = games[order].reshape(-1, G)
    assert per_cell.var(axis=1, ddof=1).mean() == pytest.approx(G * tau2, rel=0.05)
    assert res.truth["D"] == pytest.approx(0.75) and res.truth["S"] == pytest.approx(0.5)


def test_participation_creates_missing_entries():
    res = generate(SynthSpec("mixed_effects", players=200, seasons=4, games=3, seed=1,
                             params={"participation": 0.7}))
    frac = np.mean(np.isnan(res.tensor.values))
    assert 0.2 < frac < 0.4


def test_copula_null_latent_correlation():
    res = generate(SynthSpec("copula", players=2000, seasons=1, seed=2,
                             params={"C": np.eye(3).tolist(), "marginals": ["uniform", "lognormal", "counts"]}))
    Z = latent_scores(res.tensor).Z.reshape(-1, 3)
    R = np.corrcoef(Z, rowvar=False)
    assert np.max(np.abs(R[~np.eye(3, dtype=bool)])) <= 0.05


def test_copula_counts_marginal_has_ties():
    res = generate(SynthSpec("copula", players=500, seasons=1, seed=3,
                             params={"metrics": 2, "marginals": "counts"}))
    col = res.tensor.values[..., 0].ravel()
    assert np.unique(col).size < 20 and np.all(col == np.round(col))


def test_binomial_league():
    res = generate(SynthSpec("binomial_league", players=100, seasons=2, games=20, seed=4))
    X = aggregate_and_evaluate(res.log, res.defs)
    assert np.array_equal(X.values, res.tensor.values)
    assert np.all(X.attempts[..., 0] == 100)
    assert res.truth["D_raw_population"] == pytest.approx(0.006098 / 0.008537, abs=1e-3)
    with pytest.raises(InvalidInput):
        generate(SynthSpec("binomial_league", players=10, seasons=1, games=30, seed=0))


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_box_score_league_and_write(tmp_path):
    res = generate(SynthSpec("box_score", players=30, seasons=2, games=8, seed=5))
    X = aggregate_and_evaluate(res.log, res.defs)
    assert len(X.metrics) == 12
    pct = [m for m, k in zip(X.metrics, X.kinds) if k == "percentage"]
    for m in pct:
        v = X.column(m)
        v = v[~np.isnan(v)]
        assert np.all((v >= 0) & (v <= 1))
    paths = res.write(tmp_path, "league")
    truth = json.loads(paths["truth"].read_text())
    assert truth["spec"]["seed"] == 5 and truth["kind"] == "box_score"


def test_invalid_specs():
    with pytest.raises(InvalidInput):
        SynthSpec("nope")
    with pytest.raises(InvalidInput):
        SynthSpec("copula", players=0)
    with pytest.raises(InvalidInput):
        generate(SynthSpec("copula", players=5, params={"C": [[1, 2], [2, 1]]}))
