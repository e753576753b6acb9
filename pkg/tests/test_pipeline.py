import json
import shutil

import numpy as np
import pytest

from ecokit import pipeline as pl
from ecokit.synth import (ClusterSpec, SynthSpec, planted_cluster, simulate_events, simulate_panel,
                          write_events)
from ecokit.var import save_fits

SMALL_CONFIG = {
    "events": "events.csv",
    "out_dir": "run",
    "overlap": {"k": 9},
    "cluster": {"params": {"kmeans": {"n_clusters": [2, 3, 4]}}, "min_clusters": 2, "max_isolates": 0},
    "irf": {"replicates": 100},
}


def write_corpus(directory, clusters, n_weeks, seed=1, config=None):
    directory.mkdir(parents=True, exist_ok=True)
    spec = SynthSpec(clusters, n_weeks=n_weeks, seed=seed)
    _, truth = simulate_panel(spec)
    write_events(directory / "events.csv", simulate_events(spec, truth))
    cfg_path = directory / "config.json"
    cfg_path.write_text(json.dumps(config or SMALL_CONFIG))
    return cfg_path


@pytest.fixture(scope="module")
def mutualistic_run(tmp_path_factory):
    root = tmp_path_factory.mktemp("mutualistic")
    clusters = [planted_cluster(3, "mutualism", strength=0.1, name=f"c{i}") for i in range(3)]
    cfg = write_corpus(root, clusters, 400)
    first = pl.run(cfg)
    return root, cfg, first


def test_manifest_lists_eight_stages(mutualistic_run):
    root, _, res = mutualistic_run
    manifest = json.loads((root / "run" / "manifest.json").read_text())
    assert [s["name"] for s in manifest["stages"]] == list(pl.STAGES)
    assert all(s["outputs"] for s in manifest["stages"])
    assert manifest["config"]["events"]["name"] == "events.csv"
    assert not any(res.cached.values())
    log = json.loads((root / "run" / "run_log.json").read_text())
    assert [s["name"] for s in log["stages"]] == list(pl.STAGES)


def test_rerun_is_cached_and_manifest_identical(mutualistic_run):
    root, cfg, _ = mutualistic_run
    before = (root / "run" / "manifest.json").read_bytes()
    again = pl.run(cfg)
    assert all(again.cached.values())
    assert (root / "run" / "manifest.json").read_bytes() == before


def test_fresh_run_is_byte_identical(mutualistic_run, tmp_path):
    root, _, _ = mutualistic_run
    shutil.copy(root / "events.csv", tmp_path / "events.csv")
    shutil.copy(root / "config.json", tmp_path / "config.json")
    pl.run(tmp_path / "config.json")
    assert (tmp_path / "run" / "manifest.json").read_bytes() == \
        (root / "run" / "manifest.json").read_bytes()
    for stage in pl.STAGES:
        a = pl.hash_outputs(root / "run" / stage)
        assert a == pl.hash_outputs(tmp_path / "run" / stage)


def test_seed_change_reruns_seeded_stages(mutualistic_run, tmp_path):
    root, _, _ = mutualistic_run
    shutil.copytree(root, tmp_path / "copy")
    cfg = json.loads((tmp_path / "copy" / "config.json").read_text())
    cfg["seed"] = 7
    (tmp_path / "copy" / "config.json").write_text(json.dumps(cfg))
    res = pl.run(tmp_path / "copy" / "config.json")
    assert res.cached["ingest"]
    for stage in ("overlap", "cluster", "var", "irf"):
        assert not res.cached[stage]
    old = json.loads((root / "run" / "manifest.json").read_text())
    new = res.manifest
    assert old["seed"] != new["seed"]
    assert [s["fingerprint"] for s in old["stages"]][1:] != [s["fingerprint"] for s in new["stages"]][1:]
    old_irf = next(s for s in old["stages"] if s["name"] == "irf")["outputs"]
    new_irf = next(s for s in new["stages"] if s["name"] == "irf")["outputs"]
    assert old_irf != new_irf


def test_changed_input_invalidates_downstream(mutualistic_run, tmp_path):
    root, _, _ = mutualistic_run
    shutil.copytree(root, tmp_path / "copy")
    events = tmp_path / "copy" / "events.csv"
    lines = events.read_text().splitlines()
    events.write_text("\n".join(lines[:-50]) + "\n")
    res = pl.run(tmp_path / "copy" / "config.json")
    assert not res.cached["ingest"]


def test_report_states_mutualistic_fraction(mutualistic_run):
    root, _, _ = mutualistic_run
    summary = json.loads((root / "run" / "report" / "summary.json").read_text())
    assert summary["study_b"]["mutualistic_fraction"] > 0.5
    assert summary["unavailable"] == []
    text = pl.report(root / "run")
    assert "Study A" in text and "mutualistic fraction = 1.000" in text
    for name in ("fig1_curve.csv", "fig1_points.csv", "fig2_histogram.csv"):
        assert (root / "run" / "report" / name).is_file()
    assert len(list((root / "run" / "report" / "networks").glob("*.dot"))) == 3


def test_report_numbers_trace_to_stage_files(mutualistic_run):
    root, _, _ = mutualistic_run
    summary = json.loads((root / "run" / "report" / "summary.json").read_text())
    typ = json.loads((root / "run" / "irf" / "typology.json").read_text())
    fit = json.loads((root / "run" / "density" / "fit.json").read_text())
    fcst = json.loads((root / "run" / "forecast" / "report.json").read_text())
    assert summary["study_b"]["table"] == typ["table"]
    assert summary["study_a"]["coefficients"] == fit["coefficients"]
    assert summary["forecast"]["rmse"] == fcst["rmse"]


def test_diagonal_corpus_has_near_zero_kappa(tmp_path):
    clusters = [ClusterSpec(np.diag([0.5] * 3).tolist(), [1.75] * 3, name=f"c{i}") for i in range(3)]
    cfg = write_corpus(tmp_path, clusters, 600, seed=2)
    pl.run(cfg)
    table = json.loads((tmp_path / "run" / "report" / "summary.json").read_text())["study_b"]["table"]
    assert len(table) == 3
    assert max(r["kappa"] for r in table) < 0.15


def test_empty_cluster_stage_marks_study_b_unavailable(tmp_path):
    save_fits(tmp_path / "fits.json", {}, {0: "1 members with enough history; need >= 2"})
    run_dir = tmp_path / "run"
    typ = pl.stage_irf(tmp_path, run_dir / "irf", replicates=100)
    assert typ["available"] is False
    summary = pl.stage_report(run_dir)
    assert "study_b" in summary["unavailable"] and "study_a" in summary["unavailable"]
    assert "Study B: unavailable" in (run_dir / "report" / "report.txt").read_text()


def test_config_validation(tmp_path):
    (tmp_path / "events.csv").write_text("user,group,ts\n")
    with pytest.raises(pl.ConfigError, match="Additional properties"):
        pl.resolve_config({"events": "events.csv", "colour": "red"}, tmp_path)
    with pytest.raises(pl.ConfigError, match="no such file"):
        pl.resolve_config({"events": "missing.csv"}, tmp_path)
    with pytest.raises(pl.ConfigError, match="holdout"):
        pl.resolve_config({"events": "events.csv", "var": {"holdout": 10}}, tmp_path)
    with pytest.raises(pl.ConfigError):
        pl.resolve_config({"events": "events.csv", "irf": {"replicates": 5}}, tmp_path)
    cfg = pl.resolve_config({"events": "events.csv"}, tmp_path)
    assert cfg["var"]["min_weeks"] == 156 and cfg["irf"]["horizon"] == 10
    assert cfg["cluster"]["max_isolates"] == 5000 and cfg["overlap"]["k"] == 600


def test_stage_failure_names_stage_and_keeps_outputs(mutualistic_run, tmp_path):
    root, _, _ = mutualistic_run
    shutil.copy(root / "events.csv", tmp_path / "events.csv")
    cfg = json.loads(json.dumps(SMALL_CONFIG))
    cfg["cluster"]["min_clusters"] = 50
    (tmp_path / "config.json").write_text(json.dumps(cfg))
    with pytest.raises(pl.StageError) as err:
        pl.run(tmp_path / "config.json")
    assert err.value.stage == "cluster"
    assert "nearest misses" in str(err.value)
    assert (tmp_path / "run" / "overlap" / "similarities.csv").is_file()
    assert (tmp_path / "run" / "cluster" / "grid_report.csv").is_file()


def test_report_renders_headline_numbers(tmp_path):
    run = tmp_path / "run"
    (run / "irf").mkdir(parents=True)
    (run / "forecast").mkdir()
    table = [{"cluster": i, "m_bar": 0.05 if i < 524 else -0.06, "kappa": 0.1} for i in range(641)]
    typ = {"available": True, "table": table, "n_clusters": 641, "mean_m_bar": 0.03,
           "mutualistic_fraction": 524 / 641, "competitive_fraction": 117 / 641,
           "t_statistic": 14.5, "t_pvalue": 1e-40, "spearman_rho": 0.58}
    (run / "irf" / "typology.json").write_text(json.dumps(typ))
    rep = {"available": True,
           "rmse": {"var": 0.75, "baseline": 0.84, "winner": "var"},
           "crps": {"var": 72669.0, "baseline": 72853.0, "winner": "var"}}
    (run / "forecast" / "report.json").write_text(json.dumps(rep))
    text = pl.report(run)
    assert "clusters: 641, mean m_bar = 0.03, mutualistic fraction = 0.817" in text
    assert "t = 14.500, Spearman rho(m_bar, kappa) = 0.580" in text
    assert "RMSE: 0.7500 vs 0.8400 -> var" in text
    assert "CRPS: 72669.0000 vs 72853.0000 -> var" in text
    assert "Study A: unavailable" in text
    summary = json.loads((run / "report" / "summary.json").read_text())
    assert summary["unavailable"] == ["study_a"]
    assert summary["study_b"]["spearman_rho"] == 0.58
