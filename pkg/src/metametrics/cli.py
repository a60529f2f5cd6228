"""Command-line interface.

Every subcommand reads its inputs, writes artifacts into ``--out`` and exits
0; failures print a JSON object on stderr and exit nonzero. Defaults may come
from a ``key = value`` config file (``--config``); explicit flags win.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .bootstrap import BootstrapConfig, BootstrapVariance, bootstrap_variance
from .dependence import (
    LatentCorrelation, cluster_metrics, fit_copula, independence_curve, independence_scores,
    latent_scores, pc_scores, pca, rank_players,
)
from .dependence.independence import independence_bands
from .dsl import load_definitions
from .errors import InvalidInput, MetaMetricsError
from .gamelog import read_game_log
from .meta import meta_scores, write_meta_csv, write_meta_json
from .report import PipelineSettings, bootstrap_with_shrinkage, file_digest, run_report
from .shrinkage import fit_tensor
from .synth import SynthSpec, generate
from .tensor import MetricTensor, aggregate_and_evaluate, apply_exposure_filter, parse_player_filter

STOCHASTIC = {"bootstrap", "copula", "shrink", "synth", "report"}


def _fmt(v):
    if v is None:
        return ""
    v = float(v)
    return "" if np.isnan(v) else repr(v)


def _write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _write_json(path, obj):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=1)
        fh.write("\n")


def _names(text):
    return [t.strip() for t in str(text).split(",") if t.strip()]


def read_config(path) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for i, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            if not sep or not key.strip():
                raise InvalidInput(f"config line {i}: expected key = value")
            out[key.strip().replace("-", "_")] = value.strip()
    return out


# ---------------------------------------------------------------- figure CSVs

def write_scatter_csv(path, scores):
    _write_csv(path, ["metric", "D_mean", "S_raw", "S_clamped"],
               [[s["metric"], _fmt(s["D_mean"]), _fmt(s["S_raw"]), _fmt(s["S_clamped"])] for s in scores])


def write_curves_csv(path, curves):
    header = ["metric", "set_size", "score", "removed", "q05", "q95"]
    rows = []
    for c in curves:
        bands = c.get("bands") or [None] * len(c["values"])
        for i, (k, v) in enumerate(zip(c["set_sizes"], c["values"])):
            lo, hi = (bands[i] or (None, None))
            rows.append([c["metric"], k, _fmt(v), c["removed"][i - 1] if i else "", _fmt(lo), _fmt(hi)])
    _write_csv(path, header, rows)


def write_scree_csv(path, eigenvalues, F):
    _write_csv(path, ["component", "eigenvalue", "F"],
               [[k + 1, _fmt(e), _fmt(f)] for k, (e, f) in enumerate(zip(eigenvalues, F))])


def write_merges_csv(path, merges):
    _write_csv(path, ["step", "left", "right", "height", "size"],
               [[m["step"], m["left"], m["right"], _fmt(m["height"]), m["size"]] for m in merges])


# ---------------------------------------------------------------- subcommands

def _settings(args, **extra):
    d = {k: v for k, v in vars(args).items() if k not in ("func", "config", "out") and v is not None}
    d["package_version"] = __version__
    d.update(extra)
    return d


def _load_inputs(args):
    log = read_game_log(args.logs)
    defs = load_definitions(args.metrics, known_stats=log.stat_names)
    return log, defs


def _filtered(args, tensor, bv=None):
    tensor = apply_exposure_filter(tensor, args.rate_min_minutes, args.total_min_minutes)
    keep = parse_player_filter(args.player_filter, tensor)
    if bv is not None:
        bv = bv.aligned(tensor)
    if len(keep) != len(tensor.players):
        idx = [tensor.players.index(p) for p in keep]
        tensor = tensor.select_players(keep)
        if bv is not None:
            bv = bv[:, idx, :]
    return tensor, bv


def cmd_ingest(args, out: Path):
    log, defs = _load_inputs(args)
    tensor = aggregate_and_evaluate(log, defs, exposure_stat=args.exposure_stat)
    tensor.save(out / "tensor.json")
    for w in tensor.warnings:
        print(f"warning: {w}", file=sys.stderr)
    return {"tensor": "tensor.json", "shape": list(tensor.shape)}


def cmd_bootstrap(args, out: Path):
    log, defs = _load_inputs(args)
    shrink = _names(args.shrink) if args.shrink else []
    if shrink:
        _, bv = bootstrap_with_shrinkage(log, defs, args.seed, args.replicates, shrink)
    else:
        bv = bootstrap_variance(log, defs, BootstrapConfig(args.replicates, args.seed))
    bv.write_csv(out / "bv.csv")
    _write_json(out / "bootstrap_provenance.json",
                _settings(args, inputs={"logs": file_digest(args.logs), "metrics": file_digest(args.metrics)},
                          warnings=bv.warnings))
    return {"bv": "bv.csv"}


def cmd_meta(args, out: Path):
    tensor = MetricTensor.load(args.tensor)
    bv = BootstrapVariance.read_csv(args.bv, tensor)
    tensor, bv_arr = _filtered(args, tensor, bv)
    scores = meta_scores(tensor, bv_arr, ddof=args.ddof)
    write_meta_csv(scores, tensor.seasons, out / "meta.csv")
    write_meta_json(scores, out / "meta.json")
    write_scatter_csv(out / "meta_scatter.csv", [s.to_dict() for s in scores])
    return {"meta": "meta.csv"}


def cmd_copula(args, out: Path):
    tensor, _ = _filtered(args, MetricTensor.load(args.tensor))
    if args.select:
        tensor = tensor.select_metrics(_names(args.select))
    corr = fit_copula(tensor, args.iterations, args.burnin, args.thin, args.seed)
    corr.save(out / "copula.json")
    _write_csv(out / "copula_mean.csv", ["metric"] + corr.metrics,
               [[n] + [_fmt(v) for v in row] for n, row in zip(corr.metrics, corr.C)])
    return {"copula": "copula.json"}


def independence_section(corr: LatentCorrelation, bands: bool):
    names = corr.metrics
    scores = independence_scores(corr.C, names)
    curves = []
    for m in range(len(names)):
        c = independence_curve(corr.C, m, names)
        entry = {"metric": c.metric, "set_sizes": c.sizes, "values": [float(v) for v in c.values],
                 "removed": c.removed, "ties": c.ties}
        if bands and corr.draws.shape[0] > 1:
            cond = [q for q in range(len(names)) if q != m]
            entry["bands"] = []
            for i in range(len(c.values)):
                if i:
                    cond.remove(names.index(c.removed[i - 1]))
                lo, _, hi = independence_bands(corr.draws, m, cond)
                entry["bands"].append([lo, hi])
        curves.append(entry)
    return scores, curves


def cmd_independence(args, out: Path):
    corr = LatentCorrelation.load(args.copula)
    scores, curves = independence_section(corr, not args.no_bands)
    _write_csv(out / "independence_scores.csv", ["metric", "score"],
               [[k, _fmt(v)] for k, v in scores.items()])
    write_curves_csv(out / "independence_curves.csv", curves)
    return {"scores": "independence_scores.csv", "curves": "independence_curves.csv"}


def cmd_pca(args, out: Path):
    corr = LatentCorrelation.load(args.copula)
    tensor, _ = _filtered(args, MetricTensor.load(args.tensor))
    tensor = tensor.select_metrics(corr.metrics)
    dec = pca(corr.C, corr.metrics)
    write_scree_csv(out / "pca_scree.csv", dec.eigenvalues, dec.F)
    K = len(dec.metrics)
    _write_csv(out / "pca_loadings.csv", ["metric"] + [f"PC{k + 1}" for k in range(K)],
               [[r[0]] + [_fmt(v) for v in r[1:]] for r in dec.loadings_rows()])
    W, imputed = pc_scores(latent_scores(tensor).Z, dec.U)
    rows = []
    for s, season in enumerate(tensor.seasons):
        for p, player in enumerate(tensor.players):
            if np.isnan(W[s, p, 0]):
                continue
            rows.append([season, player] + [_fmt(v) for v in W[s, p]] + [int(imputed[s, p])])
    _write_csv(out / "pc_scores.csv", ["season", "player_id"] + [f"PC{k + 1}" for k in range(K)] + ["imputed"], rows)
    seasons = _names(args.season) if args.season else None
    rank_rows = []
    for k in range(min(args.components, K)):
        for i, (season, player, v) in enumerate(
                rank_players(W, k, tensor.seasons, tensor.players, seasons, args.top)):
            rank_rows.append([f"PC{k + 1}", i + 1, season, player, tensor.player_names.get(player, ""), _fmt(v)])
    _write_csv(out / "pc_rankings.csv", ["component", "rank", "season", "player_id", "player_name", "score"],
               rank_rows)
    return {"scree": "pca_scree.csv", "loadings": "pca_loadings.csv"}


def cmd_cluster(args, out: Path):
    corr = LatentCorrelation.load(args.copula)
    tree = cluster_metrics(corr.C, corr.metrics)
    write_merges_csv(out / "cluster_merges.csv", list(tree.merges()))
    (out / "cluster_tree.nwk").write_text(tree.to_newick() + "\n", encoding="utf-8")
    return {"merges": "cluster_merges.csv", "tree": "cluster_tree.nwk"}


def cmd_shrink(args, out: Path):
    log, defs = _load_inputs(args)
    metrics = _names(args.shrink)
    if not metrics:
        raise InvalidInput("shrink needs at least one percentage metric (--shrink)")
    base = aggregate_and_evaluate(log, defs)
    kwargs = {"leave_one_out": args.leave_one_out, "fixed_r": args.fixed_r}
    for metric in metrics:
        fit = fit_tensor(base, metric, **kwargs)
        slug = "".join(ch if ch.isalnum() else "_" for ch in metric)
        fit.write_player_csv(out / f"shrink_{slug}_players.csv")
        fit.write_season_csv(out / f"shrink_{slug}_seasons.csv")
    tensor, bv = bootstrap_with_shrinkage(log, defs, args.seed, args.replicates, metrics)
    tensor.save(out / "tensor_eb.json")
    bv.write_csv(out / "bv_eb.csv")
    ftensor, bv_arr = _filtered(args, tensor, bv)
    names = [n for m in metrics for n in (m, f"{m} EB")]
    scores = meta_scores(ftensor, bv_arr, metrics=names, ddof=args.ddof)
    write_meta_csv(scores, ftensor.seasons, out / "shrink_meta.csv")
    _write_json(out / "shrink_provenance.json",
                _settings(args, inputs={"logs": file_digest(args.logs), "metrics": file_digest(args.metrics)}))
    return {"tensor": "tensor_eb.json", "bv": "bv_eb.csv", "meta": "shrink_meta.csv"}


def _param(text):
    key, sep, value = text.partition("=")
    if not sep:
        raise argparse.ArgumentTypeError(f"expected key=value, got {text!r}")
    try:
        return key.strip(), json.loads(value)
    except json.JSONDecodeError:
        return key.strip(), value


def cmd_synth(args, out: Path):
    spec = SynthSpec(args.kind, args.players, args.seasons, args.games, args.seed, args.teams,
                     dict(args.param or []))
    res = generate(spec)
    paths = res.write(out, args.prefix)
    return {k: p.name for k, p in paths.items()}


def cmd_report(args, out: Path):
    log, defs = _load_inputs(args)
    settings = PipelineSettings(
        seed=args.seed, replicates=args.replicates, iterations=args.iterations, burnin=args.burnin,
        thin=args.thin, shrink=_names(args.shrink) if args.shrink else (),
        player_filter=args.player_filter, rate_min_minutes=args.rate_min_minutes,
        total_min_minutes=args.total_min_minutes, top=args.top, components=args.components,
        stability_ddof=args.ddof,
        inputs={"logs": file_digest(args.logs), "metrics": file_digest(args.metrics)},
    )
    report = run_report(log, defs, settings)
    _write_json(out / "report.json", report)
    write_scatter_csv(out / "meta_scatter.csv", report["meta"])
    write_curves_csv(out / "independence_curves.csv", report["independence"]["curves"])
    write_scree_csv(out / "pca_scree.csv", report["pca"]["eigenvalues"], report["pca"]["F"])
    write_merges_csv(out / "cluster_merges.csv", report["cluster"]["merges"])
    (out / "cluster_tree.nwk").write_text(report["cluster"]["newick"] + "\n", encoding="utf-8")
    return {"report": "report.json"}


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="metametrics", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, seed=False):
        p.add_argument("--config", help="key = value defaults file")
        p.add_argument("--out", default=".", help="output directory")
        if seed:
            p.add_argument("--seed", type=int, help="RNG seed (required)")

    def inputs(p):
        p.add_argument("--logs", required=False, help="per-game log CSV")
        p.add_argument("--metrics", required=False, help="metric definition file")

    def filters(p):
        p.add_argument("--player-filter", default="all",
                       help="all | ids:a,b | file:<path> | min_seasons:<k>")
        p.add_argument("--rate-min-minutes", type=float, default=500.0)
        p.add_argument("--total-min-minutes", type=float, default=0.0)

    def sampler(p):
        p.add_argument("--iterations", type=int, default=2000)
        p.add_argument("--burnin", type=int, default=500)
        p.add_argument("--thin", type=int, default=5)

    p = sub.add_parser("ingest", help="game logs -> metric tensor")
    common(p)
    inputs(p)
    p.add_argument("--exposure-stat", default="MIN")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("bootstrap", help="bootstrap variance table")
    common(p, seed=True)
    inputs(p)
    p.add_argument("--replicates", type=int, default=500)
    p.add_argument("--shrink", help="comma-separated percentage metrics to add EB columns for")
    p.set_defaults(func=cmd_bootstrap)

    p = sub.add_parser("meta", help="discrimination and stability")
    common(p)
    p.add_argument("--tensor", required=False)
    p.add_argument("--bv", required=False)
    p.add_argument("--ddof", type=int, default=1)
    filters(p)
    p.set_defaults(func=cmd_meta)

    p = sub.add_parser("copula", help="latent correlation posterior")
    common(p, seed=True)
    p.add_argument("--tensor", required=False)
    p.add_argument("--select", help="comma-separated metric subset")
    sampler(p)
    filters(p)
    p.set_defaults(func=cmd_copula)

    p = sub.add_parser("independence", help="independence scores and curves")
    common(p)
    p.add_argument("--copula", required=False)
    p.add_argument("--no-bands", action="store_true", help="skip posterior bands on curves")
    p.set_defaults(func=cmd_independence)

    p = sub.add_parser("pca", help="principal components, scores and rankings")
    common(p)
    p.add_argument("--copula", required=False)
    p.add_argument("--tensor", required=False)
    p.add_argument("--components", type=int, default=3)
    p.add_argument("--top", type=int, default=10)
    p.add_argument("--season", help="comma-separated seasons to rank within")
    filters(p)
    p.set_defaults(func=cmd_pca)

    p = sub.add_parser("cluster", help="average-linkage tree of metrics")
    common(p)
    p.add_argument("--copula", required=False)
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser("shrink", help="empirical-Bayes percentage columns")
    common(p, seed=True)
    inputs(p)
    p.add_argument("--shrink", help="comma-separated percentage metrics")
    p.add_argument("--replicates", type=int, default=500)
    p.add_argument("--leave-one-out", action="store_true")
    p.add_argument("--fixed-r", type=float)
    p.add_argument("--ddof", type=int, default=1)
    filters(p)
    p.set_defaults(func=cmd_shrink)

    p = sub.add_parser("synth", help="generate synthetic data")
    common(p, seed=True)
    p.add_argument("--kind", default="mixed_effects",
                   choices=["mixed_effects", "binomial_league", "copula", "box_score"])
    p.add_argument("--players", type=int, default=100)
    p.add_argument("--seasons", type=int, default=5)
    p.add_argument("--games", type=int, default=20)
    p.add_argument("--teams", type=int)
    p.add_argument("--param", type=_param, action="append", help="model parameter key=json")
    p.add_argument("--prefix", default="synth")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("report", help="full pipeline bundled into one JSON")
    common(p, seed=True)
    inputs(p)
    p.add_argument("--replicates", type=int, default=500)
    p.add_argument("--shrink", help="comma-separated percentage metrics")
    p.add_argument("--components", type=int, default=3)
    p.add_argument("--top", type=int, default=10)
    p.add_argument("--ddof", type=int, default=1)
    sampler(p)
    filters(p)
    p.set_defaults(func=cmd_report)
    return parser


REQUIRED = {
    "ingest": ("logs", "metrics"), "bootstrap": ("logs", "metrics"), "meta": ("tensor", "bv"),
    "copula": ("tensor",), "independence": ("copula",), "pca": ("copula", "tensor"),
    "cluster": ("copula",), "shrink": ("logs", "metrics"), "synth": (), "report": ("logs", "metrics"),
}


def parse_args(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        cfg = read_config(args.config)
        choices = parser._subparsers._group_actions[0].choices
        subparser = choices[args.command]
        # one file may serve several subcommands; keys no subcommand knows are typos
        known = {a.dest for sp in choices.values() for a in sp._actions}
        unknown = sorted(set(cfg) - known)
        if unknown:
            raise InvalidInput(f"unknown config keys: {', '.join(unknown)}")
        dests = {a.dest for a in subparser._actions}
        cfg = {k: v for k, v in cfg.items() if k in dests}
        for a in subparser._actions:
            if isinstance(a, argparse._StoreTrueAction) and a.dest in cfg:
                cfg[a.dest] = cfg[a.dest].lower() in ("1", "true", "yes", "on")
        subparser.set_defaults(**cfg)
        args = parser.parse_args(argv)
    for name in REQUIRED[args.command]:
        if getattr(args, name, None) is None:
            raise InvalidInput(f"{args.command} needs --{name.replace('_', '-')}")
    if args.command in STOCHASTIC and getattr(args, "seed", None) is None:
        raise InvalidInput(f"{args.command} is stochastic and needs --seed")
    return args


def main(argv=None) -> int:
    try:
        args = parse_args(argv)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        result = args.func(args, out)
        print(json.dumps({"status": "ok", "command": args.command, "outputs": result}))
        return 0
    except MetaMetricsError as exc:
        print(json.dumps(exc.to_dict()), file=sys.stderr)
        return 2
    except (OSError, ValueError, KeyError) as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
