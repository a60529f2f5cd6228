"""End-to-end pipeline and the bundled JSON report."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Sequence

import jsonschema
import numpy as np

from . import __version__
from .bootstrap import BootstrapConfig, bootstrap_variance
from .dependence import (
    cluster_metrics, fit_copula, independence_curve, independence_scores, latent_scores,
    pc_scores, pca, rank_players,
)
from .dsl import MetricDefinition
from .gamelog import GameLog
from .meta import meta_scores
from .shrinkage import ShrinkageColumn, fit_tensor
from .tensor import MetricTensor, aggregate_and_evaluate, apply_exposure_filter, parse_player_filter


@dataclass
class PipelineSettings:
    seed: int
    replicates: int = 500
    iterations: int = 2000
    burnin: int = 500
    thin: int = 5
    shrink: Sequence[str] = ()
    player_filter: str = "all"
    rate_min_minutes: float = 500.0
    total_min_minutes: float = 0.0
    top: int = 10
    components: int = 3
    stability_ddof: int = 1
    inputs: dict = field(default_factory=dict)


def _num(v):
    if v is None:
        return None
    v = float(v)
    return None if np.isnan(v) else v


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def bootstrap_with_shrinkage(log: GameLog, defs: Sequence[MetricDefinition], seed: int,
                             replicates: int, shrink: Sequence[str] = ()):
    """Tensor and BV including an EB column per shrunk metric.

    The EB column's BV comes from refitting the shrinkage inside every
    bootstrap replicate.
    """
    tensor = aggregate_and_evaluate(log, defs)
    hooks = [ShrinkageColumn(m) for m in shrink]
    for h in hooks:
        fit = fit_tensor(tensor, h.source)
        tensor = tensor.with_column(h.name, fit.post_mean, kind="percentage",
                                    attempts=np.where(fit.n > 0, fit.n, np.nan))
    bv = bootstrap_variance(log, defs, BootstrapConfig(replicates, seed), derived=hooks,
                            derived_names=[h.name for h in hooks])
    return tensor, bv


def dependence_section(tensor: MetricTensor, settings: PipelineSettings):
    corr = fit_copula(tensor, settings.iterations, settings.burnin, settings.thin, settings.seed)
    names = corr.metrics
    scores = independence_scores(corr.C, names)
    curves = [independence_curve(corr.C, m, names) for m in range(len(names))]
    dec = pca(corr.C, names)
    Z = latent_scores(tensor).Z
    W, imputed = pc_scores(Z, dec.U)
    k_max = min(settings.components, len(names))
    rankings = {
        f"PC{k + 1}": [
            {"rank": i + 1, "season": s, "player_id": p, "score": v}
            for i, (s, p, v) in enumerate(rank_players(W, k, tensor.seasons, tensor.players, top=settings.top))
        ]
        for k in range(k_max)
    }
    tree = cluster_metrics(corr.C, names) if len(names) >= 2 else None
    independence = {
        "latent_correlation": None,
        "scores": {k: float(v) for k, v in scores.items()},
        "curves": [
            {"metric": c.metric, "set_sizes": c.sizes, "values": [float(v) for v in c.values],
             "removed": c.removed, "ties": c.ties}
            for c in curves
        ] if len(names) >= 2 else [],
    }
    pca_out = {
        "metrics": names,
        "eigenvalues": [float(v) for v in dec.eigenvalues],
        "F": [float(v) for v in dec.F],
        "loadings": {n: [float(v) for v in row] for n, row in zip(names, dec.U)},
        "rankings": rankings,
        "imputed_rows": int(imputed.sum()),
    }
    cluster_out = {
        "labels": names,
        "merges": list(tree.merges()) if tree else [],
        "newick": tree.to_newick() if tree else "",
    }
    copula_out = {
        "metrics": names,
        "C": corr.C.tolist(),
        "n_draws": int(corr.draws.shape[0]),
        "n_rows": corr.n_rows,
        "floor_triggered": corr.floor_triggered,
    }
    return corr, copula_out, independence, pca_out, cluster_out


def run_report(log: GameLog, defs: Sequence[MetricDefinition], settings: PipelineSettings) -> dict:
    tensor, bv = bootstrap_with_shrinkage(log, defs, settings.seed, settings.replicates, settings.shrink)
    tensor = apply_exposure_filter(tensor, settings.rate_min_minutes, settings.total_min_minutes)
    keep = parse_player_filter(settings.player_filter, tensor)
    bv_arr = bv.aligned(tensor)
    if len(keep) != len(tensor.players):
        idx = [tensor.players.index(p) for p in keep]
        tensor = tensor.select_players(keep)
        bv_arr = bv_arr[:, idx, :]
    scores = meta_scores(tensor, bv_arr, ddof=settings.stability_ddof)
    _, copula_out, independence, pca_out, cluster_out = dependence_section(tensor, settings)
    independence["latent_correlation"] = copula_out
    shrink_out = {}
    by_name = {s.metric: s for s in scores}
    for metric in settings.shrink:
        eb = f"{metric} EB"
        fit = fit_tensor(tensor, metric)
        shrink_out[metric] = {
            "column": eb,
            "players_fit": int(np.sum(~np.isnan(fit.career_mean))),
            "median_r": _num(np.nanmedian(fit.r)),
            "raw": {"D": _num(by_name[metric].D_mean), "S": _num(by_name[metric].S_raw)},
            "eb": {"D": _num(by_name[eb].D_mean), "S": _num(by_name[eb].S_raw)},
        }
    report = {
        "meta": [s.to_dict() for s in scores],
        "independence": independence,
        "pca": pca_out,
        "cluster": cluster_out,
        "shrinkage": shrink_out,
        "provenance": {
            "package_version": __version__,
            "seed": settings.seed,
            "bootstrap_replicates": settings.replicates,
            "sampler": {"iterations": settings.iterations, "burnin": settings.burnin,
                        "thin": settings.thin, "prior": "inverse-Wishart(identity, M + 2)"},
            "player_filter": settings.player_filter,
            "exposure_filter": {"rate_min_minutes": settings.rate_min_minutes,
                                "total_min_minutes": settings.total_min_minutes},
            "stability_ddof": settings.stability_ddof,
            "metrics": [d.to_source() for d in defs],
            "inputs": dict(settings.inputs),
            "warnings": list(tensor.warnings) + list(bv.warnings),
        },
    }
    validate_report(report)
    return report


_NUM = {"type": ["number", "null"]}
REPORT_SCHEMA = {
    "type": "object",
    "required": ["meta", "independence", "pca", "cluster", "shrinkage", "provenance"],
    "additionalProperties": False,
    "properties": {
        "meta": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["metric", "D_mean", "D_by_season", "S_raw", "S_clamped", "n_players", "n_seasons"],
                "properties": {
                    "metric": {"type": "string"},
                    "D_mean": _NUM,
                    "S_raw": _NUM,
                    "S_clamped": {"type": ["number", "null"], "minimum": 0, "maximum": 1},
                    "D_by_season": {"type": "object", "additionalProperties": _NUM},
                    "n_players": {"type": "integer", "minimum": 0},
                    "n_seasons": {"type": "integer", "minimum": 0},
                },
            },
        },
        "independence": {
            "type": "object",
            "required": ["latent_correlation", "scores", "curves"],
            "properties": {
                "latent_correlation": {"type": "object", "required": ["metrics", "C", "n_draws"]},
                "scores": {"type": "object",
                           "additionalProperties": {"type": "number", "minimum": 0, "maximum": 1}},
                "curves": {"type": "array", "items": {
                    "type": "object",
                    "required": ["metric", "set_sizes", "values", "removed"],
                    "properties": {"values": {"type": "array",
                                              "items": {"type": "number", "minimum": 0, "maximum": 1}}},
                }},
            },
        },
        "pca": {
            "type": "object",
            "required": ["eigenvalues", "F", "loadings", "rankings"],
            "properties": {"F": {"type": "array", "items": {"type": "number", "minimum": 0,
                                                            "maximum": 1.0000000001}}},
        },
        "cluster": {
            "type": "object",
            "required": ["labels", "merges", "newick"],
            "properties": {"merges": {"type": "array", "items": {
                "type": "object",
                "required": ["left", "right", "height"],
                "properties": {"height": {"type": "number", "minimum": 0, "maximum": 1}},
            }}},
        },
        "shrinkage": {"type": "object"},
        "provenance": {"type": "object", "required": ["seed", "bootstrap_replicates", "sampler"]},
    },
}


def validate_report(report: dict) -> None:
    jsonschema.validate(report, REPORT_SCHEMA)
