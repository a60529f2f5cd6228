import numpy as np
import pytest
from scipy.optimize import minimize_scalar

from metametrics.bootstrap import BootstrapConfig, bootstrap_variance
from metametrics.errors import InvalidInput
from metametrics.shrinkage import (
    LOG_R_BOUNDS, ShrinkageColumn, fit_shrinkage, fit_tensor, marginal_loglik, shrunken_metric,
)
from metametrics.synth import SynthSpec, generate


def test_conjugate_example():
    fit = fit_shrinkage([[40], [30]], [[100], [100]], fixed_r=100)
    assert fit.career_mean[0] == pytest.approx(0.35)
    assert fit.post_mean[0, 0] == pytest.approx(0.375)


def test_fixed_point_and_no_pooling_limit():
    fit = fit_shrinkage([[35], [70]], [[100], [200]])
    assert fit.post_mean[:, 0] == pytest.approx([0.35, 0.35])
    raw = fit_shrinkage([[3, 9], [5, 1]], [[10, 20], [7, 4]], fixed_r=0)
    assert raw.post_mean == pytest.approx(np.array([[3 / 10, 9 / 20], [5 / 7, 1 / 4]]))


def test_data_dominates_with_huge_attempts():
    fit = fit_shrinkage([[420_000], [420_000]], [[1_000_000], [1_400_000]])
    assert fit.career_mean[0] == pytest.approx(0.35)
    assert fit.post_mean[0, 0] == pytest.approx(0.42, abs=1e-3)


def test_posterior_mean_between_raw_and_career():
    rng = np.random.default_rng(0)
    n = rng.integers(1, 300, size=(6, 40)).astype(float)
    z = rng.binomial(n.astype(int), 0.3).astype(float)
    fit = fit_shrinkage(z, n)
    lo = np.minimum(z / n, fit.career_mean)
    hi = np.maximum(z / n, fit.career_mean)
    assert np.all(fit.post_mean >= lo - 1e-15) and np.all(fit.post_mean <= hi + 1e-15)
    differ = np.abs(z / n - fit.career_mean) > 1e-9
    inner = (fit.post_mean > lo) & (fit.post_mean < hi)
    assert np.all(inner[differ & (fit.r < 1e6 * 0.999)[None, :].repeat(6, 0)])
    assert np.all((fit.post_var > 0) & (fit.post_var < 0.25))


def test_likelihood_optimum():
    rng = np.random.default_rng(1)
    career = rng.beta(20, 30, 25)
    pi = rng.beta(60 * career, 60 * (1 - career), size=(10, 25))
    n = rng.poisson(150, size=(10, 25)).astype(float)
    z = rng.binomial(n.astype(int), pi).astype(float)
    fit = fit_shrinkage(z, n)
    log_r = np.log(fit.r)
    ll = marginal_loglik(log_r, z, n, fit.career_mean)
    for end in LOG_R_BOUNDS:
        assert np.all(ll >= marginal_loglik(end, z, n, fit.career_mean) - 1e-9)
    for p in range(25):
        ref = minimize_scalar(lambda t: -marginal_loglik(t, z[:, p:p + 1], n[:, p:p + 1], fit.career_mean[p:p + 1])[0],
                              bounds=LOG_R_BOUNDS, method="bounded", options={"xatol": 1e-8})
        assert ll[p] >= -ref.fun - 1e-7


def test_missing_seasons_are_skipped():
    z = np.array([[5.0, np.nan], [3.0, 4.0]])
    n = np.array([[10.0, 0.0], [10.0, 8.0]])
    fit = fit_shrinkage(z, n)
    assert np.isnan(fit.post_mean[0, 1])
    assert fit.career_mean[1] == 0.5


def test_degenerate_career_rate():
    fit = fit_shrinkage([[0.0], [0.0]], [[5.0], [7.0]])
    assert fit.degenerate[0] and fit.r[0] == pytest.approx(1e6)
    assert fit.post_mean[:, 0] == pytest.approx([0.0, 0.0])


def test_leave_one_out_center():
    fit = fit_shrinkage([[10.0], [30.0], [20.0]], [[100.0], [100.0], [100.0]], fixed_r=100, leave_one_out=True)
    # season 0 shrinks toward (30 + 20) / 200
    assert fit.post_mean[0, 0] == pytest.approx((10 + 25) / 200)


def test_errors():
    with pytest.raises(InvalidInput):
        fit_shrinkage([[0.0]], [[0.0]])
    with pytest.raises(InvalidInput):
        fit_shrinkage([[6.0]], [[5.0]])
    with pytest.raises(InvalidInput):
        fit_shrinkage([[1.0]], [[5.0]], fixed_r=-1)


def league(seed, players=60, seasons=6):
    spec = SynthSpec("binomial_league", players=players, seasons=seasons, games=10, seed=seed,
                     params={"ability_a": 35, "ability_b": 65, "r": 100, "attempts": 200,
                             "attempts_dist": "poisson"})
    return generate(spec)


def test_tensor_helpers_and_column():
    res = league(2)
    fit = fit_tensor(res.tensor, "3P%")
    X = shrunken_metric(res.tensor, fit, "3P% EB")
    assert X.metrics == ["3P%", "3P% EB"]
    assert np.array_equal(np.isnan(X.values[..., 1]), np.isnan(X.values[..., 0]))
    with pytest.raises(InvalidInput):
        fit_tensor(res.tensor.with_column("T", np.ones((6, 60)), kind="total"), "T")


def test_bootstrap_refit_is_deterministic():
    res = league(3, players=20, seasons=3)
    hook = ShrinkageColumn("3P%")
    a = bootstrap_variance(res.log, res.defs, BootstrapConfig(20, 5), derived=[hook])
    b = bootstrap_variance(res.log, res.defs, BootstrapConfig(20, 5), derived=[hook])
    assert a.metrics == ["3P%", "3P% EB"]
    assert a.bv.tobytes() == b.bv.tobytes()
    assert np.nanmedian(a.bv[..., 1]) < np.nanmedian(a.bv[..., 0])
