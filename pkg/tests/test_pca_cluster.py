from itertools import combinations

import numpy as np
import pytest

from metametrics.dependence import cluster_metrics, pc_scores, pca, rank_players
from metametrics.dependence.latent import normal_scores
from metametrics.dependence.pca import canonical_signs
from metametrics.errors import InvalidInput

from conftest import random_corr


def test_identity_spectrum():
    dec = pca(np.eye(5))
    assert dec.F == pytest.approx([0.2, 0.4, 0.6, 0.8, 1.0], abs=1e-12)


def test_equicorrelation():
    C = np.full((5, 5), 0.5) + 0.5 * np.eye(5)
    dec = pca(C)
    assert abs(dec.eigenvalues[0] - 3.0) <= 1e-10
    assert abs(dec.F[0] - 0.6) <= 1e-10
    assert abs(dec.F[-1] - 1.0) <= 1e-10
    assert np.all(dec.U[:, 0] > 0)


def test_spectrum_properties():
    rng = np.random.default_rng(0)
    for _ in range(50):
        M = int(rng.integers(2, 9))
        dec = pca(random_corr(rng, M))
        assert abs(dec.F[-1] - 1.0) <= 1e-10
        assert np.all(np.diff(dec.F) >= -1e-15)
        assert np.all(np.diff(dec.eigenvalues) <= 1e-12)
        assert dec.eigenvalues.sum() == pytest.approx(M)
        assert np.allclose(dec.U.T @ dec.U, np.eye(M), atol=1e-10)


def test_scores_are_uncorrelated():
    rng = np.random.default_rng(1)
    X = rng.multivariate_normal(np.zeros(4), random_corr(rng, 4), size=500)
    Z = np.column_stack([normal_scores(X[:, j]) for j in range(4)])
    dec = pca(np.corrcoef(Z, rowvar=False))
    W, imputed = pc_scores(Z, dec.U)
    R = np.corrcoef(W, rowvar=False)
    assert np.max(np.abs(R - np.diag(np.diag(R)))) <= 1e-8
    assert not imputed.any()


def test_missing_entries_are_imputed_and_flagged():
    Z = np.array([[1.0, np.nan], [np.nan, np.nan], [0.5, 0.5]])
    W, imputed = pc_scores(Z, np.eye(2))
    assert W[0].tolist() == [1.0, 0.0]
    assert imputed.tolist() == [True, True, False]
    assert np.all(np.isnan(W[1]))


def test_sign_canonicalization():
    U = np.array([[0.6, -0.8], [-0.8, -0.6]])
    V = canonical_signs(U)
    assert V[1, 0] == 0.8 and V[0, 1] == 0.8


def test_ranking():
    W = np.zeros((2, 3, 1))
    W[:, :, 0] = [[0.5, 2.0, -1.0], [0.5, 1.0, 3.0]]
    rows = rank_players(W, 0, ["s1", "s2"], ["a", "b", "c"])
    assert [(s, p) for s, p, _ in rows[:3]] == [("s2", "c"), ("s1", "b"), ("s2", "b")]
    # ties by player id, then season
    assert [(s, p) for s, p, _ in rows[3:5]] == [("s1", "a"), ("s2", "a")]
    assert rank_players(W, 0, ["s1", "s2"], ["a", "b", "c"], season_filter=["s1"], top=1) == [("s1", "b", 2.0)]
    flipped = rank_players(-W, 0, ["s1", "s2"], ["a", "b", "c"])
    assert [r[:2] for r in flipped][-1] == ("s2", "c")
    single = rank_players(np.ones((1, 1, 1)), 0, ["s"], ["only"])
    assert single[0][1] == "only"
    with pytest.raises(InvalidInput):
        rank_players(W, 1, ["s1", "s2"], ["a", "b", "c"])


def test_dominant_player_tops_first_component():
    rng = np.random.default_rng(2)
    C = np.full((4, 4), 0.7) + 0.3 * np.eye(4)
    Z = rng.multivariate_normal(np.zeros(4), C, size=(1, 60))
    Z[0, 17] = 3.0
    dec = pca(C)
    W, _ = pc_scores(Z, dec.U)
    top = rank_players(W, 0, ["s"], [f"p{i:02d}" for i in range(60)], top=1)
    assert top[0][1] == "p17"


def brute_average_linkage(D):
    clusters = [frozenset([i]) for i in range(len(D))]
    heights = []
    while len(clusters) > 1:
        best = None
        for a, b in combinations(range(len(clusters)), 2):
            d = np.mean([D[i, j] for i in clusters[a] for j in clusters[b]])
            if best is None or d < best[0] - 1e-15:
                best = (d, a, b)
        d, a, b = best
        merged = clusters[a] | clusters[b]
        clusters = [c for k, c in enumerate(clusters) if k not in (a, b)] + [merged]
        heights.append((d, merged))
    return heights


def test_cluster_against_brute_force():
    rng = np.random.default_rng(3)
    for _ in range(20):
        C = random_corr(rng, 4)
        tree = cluster_metrics(C, list("abcd"))
        oracle = brute_average_linkage(1 - np.abs(C))
        assert tree.heights == pytest.approx([h for h, _ in oracle], abs=1e-12)
        members = {}
        for i, (a, b, _, _) in enumerate(tree.linkage):
            left = members.get(int(a), frozenset([int(a)]))
            right = members.get(int(b), frozenset([int(b)]))
            members[4 + i] = left | right
            assert members[4 + i] == oracle[i][1]


def test_cluster_boundaries():
    C = np.array([[1.0, -1.0, 0.0], [-1.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
    tree = cluster_metrics(C, ["x", "y", "z"])
    assert tree.heights[0] == 0.0
    assert list(tree.merges())[0]["left"] in ("x", "y")
    ident = cluster_metrics(np.eye(4))
    assert np.allclose(ident.heights, 1.0)
    newick = cluster_metrics(C, ["x", "y", "3P% EB"]).to_newick()
    assert newick.endswith(";") and "'3P% EB'" in newick
    assert np.all(np.diff(tree.heights) >= 0)
    with pytest.raises(InvalidInput):
        cluster_metrics(np.eye(1))
