"""``ecokit`` command line interface.

Exit status is 0 on success; on failure a JSON object
``{"error": ..., "message": ..., "stage": ...}`` is printed to stderr and the
exit status is 1 (2 for usage errors).
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from ecokit import __version__
from ecokit import pipeline as pl


def _json_arg(path):
    if path is None:
        return {}
    with open(path) as fh:
        return json.load(fh)


def cmd_ingest(a):
    stats = pl.stage_ingest(a.events, a.out, format=a.format, top_n=a.top_n,
                            exclude_file=a.exclude_file, window=a.window, week_anchor=a.week_anchor)
    return stats


def cmd_overlap(a):
    m = pl.stage_overlap(getattr(a, "in"), a.out, k=a.k, seed=a.seed, method=a.method)
    return {"groups": len(m.groups), "k": m.k}


def cmd_cluster(a):
    grid = _json_arg(a.grid_file)
    best = pl.stage_cluster(
        getattr(a, "in"), a.out, algorithms=grid.get("algorithms", ["kmeans"]),
        params=grid.get("params", {"kmeans": {"n_clusters": [50, 100, 200]}}),
        k_dims=grid.get("k_dims"), max_isolates=a.max_isolates, min_clusters=a.min_clusters,
        seed=a.seed, purity_file=a.purity_file)
    return {"algorithm": best.algorithm, "hyperparameters": best.hyperparameters,
            "silhouette": best.silhouette, "n_clusters": best.n_clusters,
            "n_isolates": best.n_isolates}


def cmd_density(a):
    doc = pl.stage_density(a.ingest, a.overlap, a.out, holdout_weeks=a.holdout_weeks,
                           smooth_weeks=a.smooth_weeks)
    return {"coefficients": doc["coefficients"], "shape_test": doc["shape_test"]}


def cmd_var(a):
    fits, skipped = pl.stage_var(a.ingest, a.cluster, a.out, min_weeks=a.min_weeks,
                                 holdout=a.holdout, include_precreation=not a.exclude_precreation)
    return {"fitted": sorted(fits), "skipped": {str(k): v for k, v in skipped.items()}}


def cmd_irf(a):
    typ = pl.stage_irf(a.var, a.out, horizon=a.horizon, replicates=a.replicates, seed=a.seed,
                       normalizer=a.normalizer)
    return {k: typ.get(k) for k in ("available", "n_clusters", "mean_m_bar", "mutualistic_fraction")}


def cmd_forecast(a):
    rep = pl.stage_forecast(a.ingest, a.var, a.out, holdout=a.holdout, pooled_rmse=not a.per_cluster_rmse)
    if not a.compare_baseline:
        return {m: rep[m]["var"] for m in ("rmse", "crps")} if rep.get("available") else rep
    return {m: rep[m] for m in ("rmse", "crps")} if rep.get("available") else rep


def cmd_simulate(a):
    from ecokit import synth

    spec = synth.SynthSpec.from_json(a.spec_file)
    if a.seed is not None:
        spec.seed = a.seed
    out = Path(a.out)
    out.mkdir(parents=True, exist_ok=True)
    panel, truth = synth.simulate_panel(spec)
    events = synth.simulate_events(spec, truth)
    name = "events.csv" if a.format == "csv" else "events.ndjson"
    synth.write_events(out / name, events, a.format)
    synth.write_truth(out / "truth.json", truth)
    panel.to_csv(out / "planted_panel.csv")
    return {"events": len(events), "groups": len(panel.groups), "path": str(out / name)}


def cmd_run(a):
    res = pl.run(a.config)
    return {"stages": [{"name": s.name, "cached": s.cached} for s in res.stages]}


def cmd_report(a):
    sys.stdout.write(pl.report(a.run_dir))
    return None


def build_parser():
    p = argparse.ArgumentParser(prog="ecokit", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("ingest", help="event log -> weekly panel and user frequencies")
    s.add_argument("--events", required=True)
    s.add_argument("--format", choices=["csv", "ndjson"], default="csv")
    s.add_argument("--top-n", type=int, default=10000)
    s.add_argument("--exclude-file")
    s.add_argument("--window", type=float, nargs=2, metavar=("START", "END"))
    s.add_argument("--week-anchor", default="monday")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_ingest)

    s = sub.add_parser("overlap", help="user-overlap embedding and density")
    s.add_argument("--in", required=True, help="ingest output directory")
    s.add_argument("--k", type=int, default=600)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--method", choices=["randomized", "exact"], default="randomized")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_overlap)

    s = sub.add_parser("cluster", help="grid-searched clustering")
    s.add_argument("--in", required=True, help="overlap output directory")
    s.add_argument("--grid-file", help="JSON with algorithms, params, k_dims")
    s.add_argument("--max-isolates", type=int, default=5000)
    s.add_argument("--min-clusters", type=int, default=50)
    s.add_argument("--purity-file", help="CSV group,flag")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_cluster)

    s = sub.add_parser("density", help="quadratic density-dependence regression")
    s.add_argument("--ingest", required=True)
    s.add_argument("--overlap", required=True)
    s.add_argument("--holdout-weeks", type=int, default=24)
    s.add_argument("--smooth-weeks", type=int, default=1)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_density)

    s = sub.add_parser("var", help="per-cluster VAR(1) and baseline fits")
    s.add_argument("--ingest", required=True)
    s.add_argument("--cluster", required=True)
    s.add_argument("--min-weeks", type=int, default=156)
    s.add_argument("--holdout", type=int, default=24)
    s.add_argument("--exclude-precreation", action="store_true")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_var)

    s = sub.add_parser("irf", help="bootstrap impulse responses and networks")
    s.add_argument("--var", required=True)
    s.add_argument("--horizon", type=int, default=10)
    s.add_argument("--replicates", type=int, default=1000)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--normalizer", choices=["rows", "pairs"], default="rows")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_irf)

    s = sub.add_parser("forecast", help="holdout forecasts, RMSE and CRPS")
    s.add_argument("--ingest", required=True)
    s.add_argument("--var", required=True)
    s.add_argument("--holdout", type=int, default=24)
    s.add_argument("--compare-baseline", action="store_true")
    s.add_argument("--per-cluster-rmse", action="store_true")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_forecast)

    s = sub.add_parser("simulate", help="synthetic event corpus with planted truth")
    s.add_argument("--spec-file", required=True)
    s.add_argument("--seed", type=int)
    s.add_argument("--format", choices=["csv", "ndjson"], default="csv")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("run", help="run the whole pipeline from a JSON config")
    s.add_argument("--config", required=True)
    s.set_defaults(func=cmd_run)

    s = sub.add_parser("report", help="print the summary of a finished run")
    s.add_argument("--run-dir", required=True)
    s.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        out = args.func(args)
    except Exception as exc:  # noqa: BLE001 - reported as JSON
        err = {"error": type(exc).__name__, "message": str(exc),
               "stage": getattr(exc, "stage", args.command)}
        sys.stderr.write(json.dumps(err) + "\n")
        return 1
    if out is not None:
        sys.stdout.write(json.dumps(out, indent=1, sort_keys=True, default=str) + "\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
