import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from metametrics.errors import DegenerateSeason, InsufficientData, InvalidInput, NoiseDominates
from metametrics.meta import (
    MixedEffectsParams, closed_form_D, closed_form_S, conditional_scores, discrimination_1d,
    meta_scores, stability_2d,
)
from metametrics.tensor import MetricTensor


def tensor(values, name="X"):
    values = np.asarray(values, dtype=float)
    S, P = values.shape
    return MetricTensor(seasons=[str(s) for s in range(S)], players=[f"p{p}" for p in range(P)],
                        metrics=[name], kinds=["total"], values=values[:, :, None])


def test_discrimination_boundaries():
    x = np.array([1.0, 2.0, 4.0, 7.0])
    assert discrimination_1d(x, np.zeros(4)) == 1.0
    spread = np.mean((x - x.mean()) ** 2)
    assert discrimination_1d(x, np.full(4, spread)) == pytest.approx(0.0, abs=1e-15)
    with pytest.raises(DegenerateSeason):
        discrimination_1d(np.full(4, 3.0), np.zeros(4))
    with pytest.raises(InsufficientData):
        discrimination_1d(np.array([1.0, np.nan]), np.array([0.0, 0.0]))


def test_discrimination_ignores_missing():
    x = np.array([1.0, np.nan, 3.0, 5.0])
    bv = np.array([0.5, 0.1, np.nan, 0.5])
    # observed with BV: players 0 and 3
    assert discrimination_1d(x, bv) == pytest.approx(1 - 0.5 / 4.0)


def test_perfectly_stable_players():
    X = np.array([[1.0, 5.0, 9.0]] * 4)
    assert stability_2d(X, np.zeros_like(X)) == pytest.approx(1.0)


def stability_by_loops(X, BV, ddof):
    num, players = 0.0, 0
    for p in range(X.shape[1]):
        obs = [(x, b) for x, b in zip(X[:, p], BV[:, p]) if not np.isnan(x) and not np.isnan(b)]
        if len(obs) < 2:
            continue
        xs = np.array([o[0] for o in obs])
        bs = np.array([o[1] for o in obs])
        num += np.sum((xs - xs.mean()) ** 2) / (len(xs) - ddof) - bs.mean()
        players += 1
    keep = [(x, b) for p in range(X.shape[1])
            for x, b in zip(X[:, p], BV[:, p])
            if not np.isnan(x) and not np.isnan(b)
            and np.sum(~np.isnan(X[:, p]) & ~np.isnan(BV[:, p])) >= 2]
    xs = np.array([k[0] for k in keep])
    bs = np.array([k[1] for k in keep])
    den = np.sum((xs - xs.mean()) ** 2) / (len(xs) - ddof) - bs.mean()
    return 1 - (num / players) / den


@pytest.mark.parametrize("ddof", [0, 1])
def test_stability_matches_loop_oracle(ddof):
    rng = np.random.default_rng(0)
    X = rng.normal(size=(6, 40)) + rng.normal(size=40)
    BV = rng.uniform(0, 0.3, size=X.shape)
    X[rng.random(X.shape) < 0.2] = np.nan
    X[:5, 0] = np.nan  # single-season player drops out
    assert stability_2d(X, BV, ddof=ddof) == pytest.approx(stability_by_loops(X, BV, ddof), rel=1e-12)


def test_noise_dominates():
    X = np.array([[0.0, 1.0], [1.0, 0.0]])
    with pytest.raises(NoiseDominates):
        stability_2d(X, np.full_like(X, 10.0))


def test_location_scale_invariance():
    rng = np.random.default_rng(1)
    X = rng.normal(size=(5, 30)) + rng.normal(size=30)
    BV = rng.uniform(0.01, 0.2, size=X.shape)
    base = meta_scores(tensor(X), BV[:, :, None])[0]
    for a, b in [(3.0, -7.0), (-0.25, 100.0)]:
        moved = meta_scores(tensor(a * X + b), (a * a * BV)[:, :, None])[0]
        assert moved.D_mean == pytest.approx(base.D_mean, abs=1e-10)
        assert moved.S_raw == pytest.approx(base.S_raw, abs=1e-10)


def test_meta_score_fields_and_clamping():
    rng = np.random.default_rng(2)
    X = rng.normal(size=(3, 20))
    BV = np.full(X.shape, 2.0)  # noise larger than signal: negative D
    sc = meta_scores(tensor(X), BV[:, :, None])[0]
    assert sc.D_mean < 0 and sc.D_mean_clamped == 0.0
    assert all(v < 0 for v in sc.D_by_season.values())
    assert np.isnan(sc.S_raw)  # denominator <= 0
    assert sc.n_players == 20 and sc.n_seasons == 3
    d = sc.to_dict()
    assert d["S_raw"] is None


def test_season_average_skips_small_seasons():
    X = np.array([[1.0, 2.0, 4.0], [1.0, np.nan, np.nan]])
    sc = meta_scores(tensor(X), np.zeros((2, 3, 1)))[0]
    assert sc.D_mean == 1.0 and np.isnan(sc.D_by_season["1"])
    assert sc.n_seasons == 1


def test_constant_metric_names_season():
    X = np.array([[1.0, 2.0], [3.0, 3.0]])
    with pytest.raises(DegenerateSeason, match="season 1"):
        meta_scores(tensor(X, "FLAT"), np.zeros((2, 2, 1)))


def test_closed_forms():
    assert closed_form_D(MixedEffectsParams(tau2=1, sigma2_PM=1, sigma2_SPM=0)) == 0.5
    assert closed_form_D(MixedEffectsParams(tau2=0, sigma2_PM=1)) == 1.0
    assert closed_form_S(MixedEffectsParams(sigma2_PM=2, sigma2_SM=1, sigma2_SPM=1, tau2=5)) == 0.5
    assert closed_form_S(MixedEffectsParams(sigma2_PM=0, sigma2_SM=1)) == 0.0
    assert closed_form_S(MixedEffectsParams(sigma2_PM=3)) == 1.0
    with pytest.raises(InvalidInput):
        closed_form_D(MixedEffectsParams())
    with pytest.raises(InvalidInput):
        MixedEffectsParams(tau2=-1)


@settings(max_examples=500, deadline=None)
@given(st.lists(st.floats(0, 1e6, allow_nan=False), min_size=4, max_size=4))
def test_closed_forms_bounded(v):
    p = MixedEffectsParams(sigma2_SM=v[0], sigma2_PM=v[1], sigma2_SPM=v[2], tau2=v[3])
    if v[1] + v[2] + v[3] > 0:
        assert 0.0 <= closed_form_D(p) <= 1.0
    if v[0] + v[1] + v[2] > 0:
        assert 0.0 <= closed_form_S(p) <= 1.0


def two_group_tensor(rng):
    P, S = 200, 4
    group = np.arange(P) % 2
    X = 10.0 * group + rng.normal(size=P) + 0.3 * rng.normal(size=(S, P))
    BV = np.full((S, P), 0.2)
    return tensor(X), BV[:, :, None], group


def test_conditional_scores():
    rng = np.random.default_rng(3)
    X, BV, group = two_group_tensor(rng)
    pooled = meta_scores(X, BV)[0]
    same = conditional_scores(X, BV, X.players)[0]
    assert same.D_mean == pooled.D_mean and same.S_raw == pooled.S_raw
    guards = [p for p, g in zip(X.players, group) if g == 0]
    sub = conditional_scores(X, BV, guards)[0]
    assert sub.D_mean < pooled.D_mean
    assert sub.n_players == len(guards)
    sub2 = conditional_scores(X, BV, lambda p: p in set(guards))[0]
    assert sub2.D_mean == sub.D_mean
    with pytest.raises(InvalidInput):
        conditional_scores(X, BV, [])
    with pytest.raises(InsufficientData):
        conditional_scores(X, BV, ["p0"])
