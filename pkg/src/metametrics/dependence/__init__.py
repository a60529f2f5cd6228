"""Latent Gaussian dependence between metrics."""

from .cluster import ClusterTree, cluster_metrics
from .copula import LatentCorrelation, fit_copula
from .independence import IndependenceCurve, independence_curve, independence_score, independence_scores
from .latent import LatentScores, latent_scores
from .pca import PCDecomposition, pc_scores, pca, rank_players

__all__ = [
    "ClusterTree", "cluster_metrics", "LatentCorrelation", "fit_copula", "IndependenceCurve",
    "independence_curve", "independence_score", "independence_scores", "LatentScores",
    "latent_scores", "PCDecomposition", "pc_scores", "pca", "rank_players",
]
