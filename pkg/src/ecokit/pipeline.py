"""Stage functions and the cached end-to-end runner.

Every stage reads its inputs from files and writes its outputs into its own
directory, so the CLI subcommands and :func:`run` share the same code.  A
stage is skipped when its directory holds a fingerprint equal to the hash of
(stage parameters, input file contents, package version).
"""
from __future__ import annotations

import csv
import hashlib
import json
import logging
import platform
import time
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import jsonschema
import numpy as np

from ecokit import __version__
from ecokit import cluster as clu
from ecokit import density as dens
from ecokit import forecast as fc
from ecokit import ingest as ing
from ecokit import irf as irfmod
from ecokit import overlap as ovl
from ecokit import var as varmod

logger = logging.getLogger(__name__)

STAGES = ("ingest", "overlap", "cluster", "density", "var", "irf", "forecast", "report")
FINGERPRINT = ".fingerprint"

DEFAULTS = {
    "format": "csv",
    "exclude_file": None,
    "purity_file": None,
    "out_dir": "ecokit-run",
    "seed": 0,
    "ingest": {"top_n": 10000, "window": None, "week_anchor": "monday",
               "rank_kinds": ["comment"], "size_kinds": ["comment"]},
    "overlap": {"k": 600, "method": "randomized"},
    "cluster": {"algorithms": ["kmeans"], "params": {"kmeans": {"n_clusters": [50, 100, 200]}},
                "k_dims": None, "max_isolates": 5000, "min_clusters": 50},
    "density": {"holdout_weeks": 24, "smooth_weeks": 1, "grid_points": 101},
    "var": {"min_weeks": 156, "holdout": 24, "include_precreation": True},
    "irf": {"horizon": 10, "replicates": 1000, "normalizer": "rows"},
    "forecast": {"holdout": 24, "pooled_rmse": True},
}

_section = {"type": "object"}
CONFIG_SCHEMA = {
    "type": "object",
    "required": ["events"],
    "additionalProperties": False,
    "properties": {
        "events": {"type": "string"},
        "format": {"enum": ["csv", "ndjson"]},
        "exclude_file": {"type": ["string", "null"]},
        "purity_file": {"type": ["string", "null"]},
        "out_dir": {"type": "string"},
        "seed": {"type": "integer", "minimum": 0},
        "ingest": {"type": "object", "additionalProperties": False, "properties": {
            "top_n": {"type": "integer", "minimum": 1},
            "window": {"type": ["array", "null"], "items": {"type": "number"},
                       "minItems": 2, "maxItems": 2},
            "week_anchor": {"enum": list(ing.WEEKDAYS)},
            "rank_kinds": {"type": "array", "items": {"type": "string"}},
            "size_kinds": {"type": "array", "items": {"type": "string"}},
        }},
        "overlap": {"type": "object", "additionalProperties": False, "properties": {
            "k": {"type": "integer", "minimum": 1},
            "method": {"enum": ["randomized", "exact"]},
        }},
        "cluster": {"type": "object", "additionalProperties": False, "properties": {
            "algorithms": {"type": "array", "minItems": 1, "items": {"enum": list(clu.ALGORITHMS)}},
            "params": {"type": "object"},
            "k_dims": {"type": ["array", "null"], "items": {"type": "integer", "minimum": 1}},
            "max_isolates": {"type": "integer", "minimum": 0},
            "min_clusters": {"type": "integer", "minimum": 1},
        }},
        "density": {"type": "object", "additionalProperties": False, "properties": {
            "holdout_weeks": {"type": "integer", "minimum": 1},
            "smooth_weeks": {"type": "integer", "minimum": 1},
            "grid_points": {"type": "integer", "minimum": 2},
        }},
        "var": {"type": "object", "additionalProperties": False, "properties": {
            "min_weeks": {"type": "integer", "minimum": 1},
            "holdout": {"type": "integer", "minimum": 1},
            "include_precreation": {"type": "boolean"},
        }},
        "irf": {"type": "object", "additionalProperties": False, "properties": {
            "horizon": {"type": "integer", "minimum": 10},
            "replicates": {"type": "integer", "minimum": 100},
            "normalizer": {"enum": ["rows", "pairs"]},
        }},
        "forecast": {"type": "object", "additionalProperties": False, "properties": {
            "holdout": {"type": "integer", "minimum": 1},
            "pooled_rmse": {"type": "boolean"},
        }},
    },
}


class ConfigError(ValueError):
    pass


class StageError(RuntimeError):
    def __init__(self, stage, message):
        super().__init__(f"stage {stage!r} failed: {message}")
        self.stage = stage
        self.diagnostics = message


def load_config(path) -> dict:
    """Read, validate and complete a JSON config; paths become absolute."""
    path = Path(path)
    with open(path) as fh:
        raw = json.load(fh)
    return resolve_config(raw, path.parent)


def resolve_config(raw: dict, base=".") -> dict:
    try:
        jsonschema.validate(raw, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        raise ConfigError(f"invalid config: {exc.message} at {list(exc.absolute_path)}") from None
    cfg = json.loads(json.dumps(DEFAULTS))
    for key, value in raw.items():
        if isinstance(value, dict) and isinstance(cfg.get(key), dict):
            cfg[key].update(value)
        else:
            cfg[key] = value
    base = Path(base)
    for key in ("events", "exclude_file", "purity_file", "out_dir"):
        if cfg.get(key) is not None:
            cfg[key] = str((base / cfg[key]).resolve())
    for key in ("events", "exclude_file", "purity_file"):
        if cfg.get(key) is not None and not Path(cfg[key]).is_file():
            raise ConfigError(f"{key}: no such file {cfg[key]}")
    if cfg["var"]["holdout"] != cfg["forecast"]["holdout"]:
        raise ConfigError("var.holdout and forecast.holdout must agree")
    return cfg


# ---------------------------------------------------------------- helpers

def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def hash_outputs(directory) -> dict[str, str]:
    directory = Path(directory)
    return {str(p.relative_to(directory)): sha256_file(p)
            for p in sorted(directory.rglob("*")) if p.is_file() and p.name != FINGERPRINT}


def _dump_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=1, sort_keys=True, default=_json_default)
        fh.write("\n")


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(type(o))


def _read_json(path):
    with open(path) as fh:
        return json.load(fh)


def read_exclusions(path) -> set[str]:
    if path is None:
        return set()
    with open(path) as fh:
        return {line.strip() for line in fh if line.strip() and not line.startswith("#")}


# ---------------------------------------------------------------- stages

def stage_ingest(events, out, format="csv", top_n=10000, exclude_file=None, window=None,
                 week_anchor="monday", rank_kinds=("comment",), size_kinds=("comment",)):
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    config = ing.CorpusConfig(
        top_n=top_n, exclusion_list=frozenset(read_exclusions(exclude_file)),
        window_start=window[0] if window else None, window_end=window[1] if window else None,
        week_anchor=week_anchor, rank_kinds=frozenset(rank_kinds), size_kinds=frozenset(size_kinds))
    panel, ufm, stats = ing.ingest(events, format, config)
    panel.to_csv(out / "panel.csv")
    ufm.to_coo_csv(out / "user_frequency.csv")
    (out / "groups.txt").write_text("".join(g + "\n" for g in ufm.groups))
    stats["week0"] = panel.week0
    _dump_json(out / "ingest.json", stats)
    return stats


def _load_ingest(d):
    d = Path(d)
    panel = ing.GroupPanel.from_csv(d / "panel.csv")
    panel.week0 = _read_json(d / "ingest.json").get("week0", 0.0)
    return panel


def stage_overlap(ingest_dir, out, k=600, seed=0, method="randomized"):
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    groups = (Path(ingest_dir) / "groups.txt").read_text().split()
    ufm = ing.UserFrequencyMatrix.from_coo_csv(Path(ingest_dir) / "user_frequency.csv", groups)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        model = ovl.build_overlap(ufm, k, seed, method)
    for w in caught:
        logger.warning("overlap: %s", w.message)
    model.save(out)
    return model


def stage_cluster(overlap_dir, out, algorithms=("kmeans",), params=None, k_dims=None,
                  max_isolates=5000, min_clusters=50, seed=0, purity_file=None):
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    model = ovl.OverlapModel.load(overlap_dir)
    k_dims = list(k_dims) if k_dims else [model.k]
    embeddings = {kd: model.embedding[:min(kd, model.k)] for kd in k_dims}
    spec = clu.GridSpec(list(algorithms), params or {}, k_dims, max_isolates, min_clusters)
    evaluated: list = []
    try:
        ranked = clu.run_grid(embeddings, spec, seed, report=evaluated)
    finally:
        clu.write_grid_report(out / "grid_report.csv", evaluated, spec)
    best = ranked[0]
    clu.write_labels(out / "labels.csv", model.groups, best.labels)
    selection = {
        "algorithm": best.algorithm, "hyperparameters": best.hyperparameters,
        "k_dims": best.k_dims, "silhouette": best.silhouette, "n_clusters": best.n_clusters,
        "n_isolates": best.n_isolates, "n_feasible": len(ranked), "n_evaluated": len(evaluated),
        "ranking_rule": "silhouette desc, isolates asc, clusters desc, grid order",
        "embedding_normalization": "unit-length group vectors",
    }
    if purity_file:
        with open(purity_file, newline="") as fh:
            flags = {r["group"]: r["flag"] for r in csv.DictReader(fh)}
        selection["purity"] = clu.purity(flags)
    _dump_json(out / "selection.json", selection)
    return best


def stage_density(ingest_dir, overlap_dir, out, holdout_weeks=24, smooth_weeks=1, grid_points=101):
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    panel = _load_ingest(ingest_dir)
    model = ovl.OverlapModel.load(overlap_dir)
    dmap = dict(zip(model.groups, model.density))
    obs = dens.compute_growth(panel, holdout_weeks, dmap, smooth_weeks)
    with open(out / "observations.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["group", "growth", "density"])
        for o in obs:
            w.writerow([o.group, repr(o.growth), repr(o.density)])
    fit = dens.fit_model1(obs)
    shape = dens.shape_test(fit)
    grid = np.linspace(*fit.density_range, grid_points)
    curve = dens.marginal_effects(fit, grid)
    with open(out / "curve.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["density", "effect", "lower", "upper"])
        for row in zip(curve["density"], curve["effect"], curve["lower"], curve["upper"]):
            w.writerow([repr(float(v)) for v in row])
    doc = {**fit.to_dict(), "shape_test": shape, "holdout_weeks": holdout_weeks,
           "smooth_weeks": smooth_weeks, "density_axis": "linear (plot on log scale if desired)"}
    _dump_json(out / "fit.json", doc)
    return doc


def stage_var(ingest_dir, cluster_dir, out, min_weeks=156, holdout=24, include_precreation=True):
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    panel = _load_ingest(ingest_dir)
    labels = clu.read_labels(Path(cluster_dir) / "labels.csv")
    clusters: dict[int, list[str]] = {}
    for g in panel.groups:
        lab = labels.get(g, clu.ISOLATE)
        if lab != clu.ISOLATE:
            clusters.setdefault(lab, []).append(g)
    fits, skipped = varmod.fit_clusters(panel, dict(sorted(clusters.items())), holdout, min_weeks,
                                        include_precreation)
    varmod.save_fits(out / "fits.json", fits, skipped)
    return fits, skipped


def stage_irf(var_dir, out, horizon=10, replicates=1000, seed=0, normalizer="rows"):
    out = Path(out)
    (out / "networks").mkdir(parents=True, exist_ok=True)
    fits, skipped = varmod.load_fits(Path(var_dir) / "fits.json")
    metrics, networks, flags = {}, {}, {}
    for cid, (vfit, _) in fits.items():
        res = irfmod.bootstrap_irf(vfit, horizon, replicates, seed)
        net = irfmod.extract_network(res)
        net.m_bar, net.kappa = irfmod.cluster_metrics(vfit.phi, normalizer)
        metrics[cid] = (net.m_bar, net.kappa)
        networks[cid] = net
        flags[cid] = {"spectral_radius": vfit.spectral_radius, "stable": vfit.stable,
                      "band_violations": res.band_violations(), "dropped_replicates": res.n_dropped}
        net.write_graphml(out / "networks" / f"cluster_{cid}.graphml")
        (out / "networks" / f"cluster_{cid}.dot").write_text(net.to_dot(f"cluster_{cid}"))
    irfmod.write_metrics_csv(out / "metrics.csv", metrics, networks)
    if len(metrics) >= 2:
        typ = irfmod.typology_report(metrics)
        irfmod.write_histogram_csv(out / "histogram.csv", typ["histogram"])
        typ["available"] = True
    else:
        typ = {"available": False, "reason": f"{len(metrics)} fitted clusters (need >= 2)",
               "table": [{"cluster": c, "m_bar": m, "kappa": k} for c, (m, k) in sorted(metrics.items())]}
    typ["normalizer"] = normalizer
    typ["skipped_clusters"] = {str(k): v for k, v in skipped.items()}
    typ["fit_flags"] = {str(k): v for k, v in flags.items()}
    _dump_json(out / "typology.json", typ)
    return typ


def stage_forecast(ingest_dir, var_dir, out, holdout=24, pooled_rmse=True):
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    panel = _load_ingest(ingest_dir)
    fits, _ = varmod.load_fits(Path(var_dir) / "fits.json")
    per = {}
    group_rmse = {"var": [], "baseline": []}
    for cid, (vfit, bfit) in fits.items():
        actual = fc.actuals_for(vfit, panel, holdout)
        vf, bf = fc.forecast(vfit, holdout), fc.forecast(bfit, holdout)
        per[cid] = fc.score_cluster(vf, bf, actual)
        for m, f in (("var", vf), ("baseline", bf)):
            group_rmse[m] += np.sqrt(((f.mean - actual) ** 2).mean(axis=0)).tolist()
    if per:
        report = fc.compare(per)
        if not pooled_rmse:
            for m in ("var", "baseline"):
                report["rmse"][m] = float(np.mean(group_rmse[m]))
            report["rmse"]["winner"] = fc._winner(report["rmse"]["var"], report["rmse"]["baseline"])
        report["available"] = True
    else:
        report = {"available": False, "reason": "no fitted clusters"}
    report["rmse_pooling"] = "cells" if pooled_rmse else "mean of per-group RMSEs"
    with open(out / "scores.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        cols = ["n_cells", "rmse_var", "rmse_baseline", "crps_var", "crps_baseline"]
        w.writerow(["cluster"] + cols)
        for cid, s in sorted(per.items()):
            w.writerow([cid] + [s[c] if c == "n_cells" else repr(s[c]) for c in cols])
    _dump_json(out / "report.json", report)
    return report


def stage_report(run_dir, out=None):
    """Summarize whatever stage outputs exist under ``run_dir``."""
    run_dir = Path(run_dir)
    out = Path(out) if out else run_dir / "report"
    (out / "networks").mkdir(parents=True, exist_ok=True)
    summary: dict = {"unavailable": []}
    lines = ["ecokit run report", "=================", ""]

    fit_path = run_dir / "density" / "fit.json"
    if fit_path.is_file():
        fit = _read_json(fit_path)
        st = fit["shape_test"]
        summary["study_a"] = {"verdict": st["verdict"], "vertex": st["vertex"],
                              "vertex_percentile": st["vertex_percentile"],
                              "coefficients": fit["coefficients"], "n": fit["n"]}
        c = fit["coefficients"]
        lines += ["Study A: density dependence",
                  f"  growth = {c['const']:.4g} {_signed(c['density'])} d {_signed(c['density^2'])} d^2 "
                  f"(n={fit['n']}, R^2={fit['r_squared']:.3f})",
                  f"  shape: {st['verdict']}; vertex d={st['vertex']:.4g} "
                  f"(percentile {st['vertex_percentile']:.1f})", ""]
        _copy(run_dir / "density" / "curve.csv", out / "fig1_curve.csv")
        _copy(run_dir / "density" / "observations.csv", out / "fig1_points.csv")
    else:
        summary["unavailable"].append("study_a")
        lines += ["Study A: unavailable (no density stage output)", ""]

    typ_path = run_dir / "irf" / "typology.json"
    typ = _read_json(typ_path) if typ_path.is_file() else None
    if typ and typ.get("available"):
        summary["study_b"] = {k: typ[k] for k in ("n_clusters", "mean_m_bar", "mutualistic_fraction",
                                                 "competitive_fraction", "t_statistic", "spearman_rho")}
        summary["study_b"]["table"] = typ["table"]
        rho = typ["spearman_rho"]
        lines += ["Study B: ecological communities",
                  f"  clusters: {typ['n_clusters']}, mean m_bar = {typ['mean_m_bar']:.4g}, "
                  f"mutualistic fraction = {typ['mutualistic_fraction']:.3f}",
                  f"  t = {_fmt(typ['t_statistic'], '.3f')}, Spearman rho(m_bar, kappa) = "
                  f"{_fmt(rho, '.3f')}",
                  "  cluster      m_bar      kappa"]
        lines += [f"  {r['cluster']:>7} {r['m_bar']:10.4f} {r['kappa']:10.4f}" for r in typ["table"]]
        lines.append("")
        _copy(run_dir / "irf" / "histogram.csv", out / "fig2_histogram.csv")
        for dot in sorted((run_dir / "irf" / "networks").glob("*.dot")):
            _copy(dot, out / "networks" / dot.name)
    else:
        summary["unavailable"].append("study_b")
        reason = typ.get("reason") if typ else "no irf stage output"
        lines += [f"Study B: unavailable ({reason})", ""]

    fc_path = run_dir / "forecast" / "report.json"
    rep = _read_json(fc_path) if fc_path.is_file() else None
    if rep and rep.get("available"):
        summary["forecast"] = {m: rep[m] for m in ("rmse", "crps")}
        lines += ["Forecast comparison (VAR vs baseline)",
                  f"  RMSE: {rep['rmse']['var']:.4f} vs {rep['rmse']['baseline']:.4f} "
                  f"-> {rep['rmse']['winner']}",
                  f"  CRPS: {rep['crps']['var']:.4f} vs {rep['crps']['baseline']:.4f} "
                  f"-> {rep['crps']['winner']}", ""]
    else:
        summary["unavailable"].append("forecast")
        lines += ["Forecast comparison: unavailable", ""]

    (out / "report.txt").write_text("\n".join(lines))
    _dump_json(out / "summary.json", summary)
    return summary


def _copy(src, dst):
    if Path(src).is_file():
        Path(dst).write_bytes(Path(src).read_bytes())


# ---------------------------------------------------------------- runner

@dataclass
class StageRecord:
    name: str
    fingerprint: str
    outputs: dict[str, str]
    cached: bool
    seconds: float


@dataclass
class RunResult:
    manifest: dict
    stages: list[StageRecord] = field(default_factory=list)

    @property
    def cached(self) -> dict[str, bool]:
        return {s.name: s.cached for s in self.stages}


def _fingerprint(name, params, inputs):
    doc = {"stage": name, "version": __version__, "params": params,
           "inputs": {k: (hash_outputs(v) if Path(v).is_dir() else sha256_file(v))
                      for k, v in sorted(inputs.items())}}
    return hashlib.sha256(json.dumps(doc, sort_keys=True).encode()).hexdigest()


def _stage_plan(cfg):
    root = Path(cfg["out_dir"])
    d = {s: root / s for s in STAGES}
    seed = cfg["seed"]
    ingest_kw = dict(cfg["ingest"], format=cfg["format"], exclude_file=cfg["exclude_file"])
    ingest_inputs = {"events": cfg["events"]}
    if cfg["exclude_file"]:
        ingest_inputs["exclude_file"] = cfg["exclude_file"]
    cluster_kw = dict(cfg["cluster"], seed=seed, purity_file=cfg["purity_file"])
    cluster_inputs = {"overlap": d["overlap"]}
    if cfg["purity_file"]:
        cluster_inputs["purity_file"] = cfg["purity_file"]
    return [
        ("ingest", ingest_kw, ingest_inputs,
         lambda: stage_ingest(cfg["events"], d["ingest"], **ingest_kw)),
        ("overlap", dict(cfg["overlap"], seed=seed), {"ingest": d["ingest"]},
         lambda: stage_overlap(d["ingest"], d["overlap"], seed=seed, **cfg["overlap"])),
        ("cluster", cluster_kw, cluster_inputs,
         lambda: stage_cluster(d["overlap"], d["cluster"], **cluster_kw)),
        ("density", cfg["density"], {"ingest": d["ingest"], "overlap": d["overlap"]},
         lambda: stage_density(d["ingest"], d["overlap"], d["density"], **cfg["density"])),
        ("var", dict(cfg["var"], seed=seed), {"ingest": d["ingest"], "cluster": d["cluster"]},
         lambda: stage_var(d["ingest"], d["cluster"], d["var"], **cfg["var"])),
        ("irf", dict(cfg["irf"], seed=seed), {"var": d["var"]},
         lambda: stage_irf(d["var"], d["irf"], seed=seed, **cfg["irf"])),
        ("forecast", cfg["forecast"], {"ingest": d["ingest"], "var": d["var"]},
         lambda: stage_forecast(d["ingest"], d["var"], d["forecast"], **cfg["forecast"])),
        ("report", {}, {s: d[s] for s in ("density", "irf", "forecast")},
         lambda: stage_report(root, d["report"])),
    ]


def run(config) -> RunResult:
    """Execute all stages, reusing outputs whose fingerprints still match.

    ``config`` is a path to a JSON config or an already resolved dict.
    Writes ``manifest.json`` (deterministic: versions, seed, hashes) and
    ``run_log.json`` (timings and cache hits) into the output directory.
    """
    cfg = load_config(config) if not isinstance(config, dict) else config
    root = Path(cfg["out_dir"])
    root.mkdir(parents=True, exist_ok=True)
    result = RunResult({})
    for name, params, inputs, fn in _stage_plan(cfg):
        t0 = time.perf_counter()
        stage_dir = root / name
        fp = _fingerprint(name, params, inputs)
        fp_file = stage_dir / FINGERPRINT
        cached = fp_file.is_file() and fp_file.read_text().strip() == fp
        if not cached:
            if fp_file.exists():
                fp_file.unlink()
            try:
                fn()
            except Exception as exc:
                logger.exception("stage %s failed", name)
                raise StageError(name, f"{type(exc).__name__}: {exc}") from exc
            fp_file.write_text(fp + "\n")
        result.stages.append(StageRecord(name, fp, hash_outputs(stage_dir), cached,
                                         time.perf_counter() - t0))
        logger.info("stage %s %s", name, "cached" if cached else "done")

    import scipy
    import sklearn

    from ecokit._kernels import BACKEND

    manifest = {
        "ecokit_version": __version__,
        "versions": {"python": platform.python_version(), "numpy": np.__version__,
                     "scipy": scipy.__version__, "scikit-learn": sklearn.__version__},
        "seed": cfg["seed"],
        "config": _portable(cfg, root),
        "stages": [{"name": s.name, "fingerprint": s.fingerprint, "outputs": s.outputs}
                   for s in result.stages],
    }
    _dump_json(root / "manifest.json", manifest)
    _dump_json(root / "run_log.json", {
        "kernel_backend": BACKEND,
        "stages": [{"name": s.name, "cached": s.cached, "seconds": round(s.seconds, 3)}
                   for s in result.stages]})
    result.manifest = manifest
    return result


def _portable(cfg, root):
    # file inputs recorded by name and content hash, not absolute path
    out = json.loads(json.dumps(cfg))
    out["out_dir"] = "."
    for key in ("events", "exclude_file", "purity_file"):
        if out.get(key):
            out[key] = {"name": Path(out[key]).name, "sha256": sha256_file(out[key])}
    return out


def _signed(x) -> str:
    return f"{'-' if x < 0 else '+'} {abs(x):.4g}"


def _fmt(x, spec) -> str:
    return "n/a" if x is None else format(x, spec)


def report(run_dir) -> str:
    """Regenerate and return the human-readable summary for a finished run."""
    stage_report(run_dir, Path(run_dir) / "report")
    return (Path(run_dir) / "report" / "report.txt").read_text()
