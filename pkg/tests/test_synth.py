import math
from collections import defaultdict

import numpy as np
import pytest
from sklearn.metrics import adjusted_rand_score

from ecokit.cluster import GridSpec, run_grid
from ecokit.ingest import WEEK_SECONDS, CorpusConfig, ingest
from ecokit.overlap import embed, normalize_frequencies, overlap_matrix
from ecokit.synth import (ClusterSpec, SynthSpec, interaction_matrix, planted_cluster,
                          read_truth, simulate_events, simulate_panel, write_events, write_truth)


def small_spec(**kw):
    clusters = [planted_cluster(3, "mutualism", name="m"), planted_cluster(3, "competition", name="c")]
    kw.setdefault("n_weeks", 30)
    return SynthSpec(clusters, **kw)


def test_noiseless_panel_is_deterministic_recursion():
    phi = [[0.5, 0.1], [0.2, 0.3]]
    c = ClusterSpec(phi, [1.0, 2.0], [0.01, 0.0], [0, 3], noise_sd=0.0)
    panel, _ = simulate_panel(SynthSpec([c], n_weeks=15))
    y = np.zeros(2)
    expected = []
    for t in range(15):
        nxt = np.array([1.0, 2.0]) + np.array([0.01, 0.0]) * t + np.array(phi) @ y
        nxt[1] = 0.0 if t < 3 else nxt[1]
        y = np.where([True, t >= 3], np.maximum(nxt, math.log(2)), 0.0)
        expected.append(y)
    np.testing.assert_allclose(panel.sizes, np.array(expected).T, rtol=1e-14, atol=0)
    assert list(panel.creation_week) == [0, 3]


def test_stable_series_reach_fixed_point():
    c = ClusterSpec([[0.9, 0.0], [0.0, 0.9]], [0.3, 0.5], noise_sd=0.0)
    panel, _ = simulate_panel(SynthSpec([c], n_weeks=300))
    np.testing.assert_allclose(panel.sizes[:, -1], [3.0, 5.0], rtol=1e-10)


def test_planted_cluster_level():
    c = planted_cluster(4, "competition", level=3.0, strength=0.1)
    phi = np.array(c.phi)
    assert np.all(phi[~np.eye(4, dtype=bool)] == -0.1)
    fixed = np.linalg.solve(np.eye(4) - phi, c.intercept)
    np.testing.assert_allclose(fixed, 3.0)
    assert interaction_matrix(2, 0.5, 0.1) == [[0.5, 0.1], [0.1, 0.5]]
    with pytest.raises(ValueError):
        planted_cluster(2, "parasitism")


def test_spec_validation():
    with pytest.raises(ValueError, match="spectral radius"):
        SynthSpec([ClusterSpec([[1.1]], [0.0])])
    SynthSpec([ClusterSpec([[1.1]], [0.0])], allow_unstable=True)
    with pytest.raises(ValueError):
        SynthSpec([ClusterSpec([[0.5]], [0.0], noise_sd=-1)])
    with pytest.raises(ValueError):
        small_spec(sharing_rate=0.8, global_rate=0.3)


def test_seeded_output_is_byte_identical(tmp_path):
    for k in range(2):
        spec = small_spec(seed=4)
        panel, truth = simulate_panel(spec)
        write_events(tmp_path / f"e{k}.csv", simulate_events(spec, truth))
        write_truth(tmp_path / f"t{k}.json", truth)
    assert (tmp_path / "e0.csv").read_bytes() == (tmp_path / "e1.csv").read_bytes()
    assert (tmp_path / "t0.json").read_bytes() == (tmp_path / "t1.json").read_bytes()
    assert read_truth(tmp_path / "t0.json") == truth


@pytest.mark.parametrize("fmt", ["csv", "ndjson"])
def test_events_reconstruct_planted_counts(tmp_path, fmt):
    spec = small_spec(seed=2)
    _, truth = simulate_panel(spec)
    events = simulate_events(spec, truth)
    distinct = defaultdict(set)
    for e in events:
        distinct[e.group, int((e.timestamp - spec.start_ts) // WEEK_SECONDS)].add(e.user)
    for g, row in zip(truth["groups"], truth["counts"]):
        assert [len(distinct[g, t]) for t in range(spec.n_weeks)] == row
    # and through the real ingest path
    path = tmp_path / f"events.{fmt}"
    write_events(path, events, fmt)
    panel, _, _ = ingest(path, fmt, CorpusConfig())
    for g, row in zip(truth["groups"], truth["counts"]):
        np.testing.assert_allclose(np.expm1(panel.sizes[panel.index(g)]), row, atol=1e-9)


def overlap_for(spec, tmp_path):
    _, truth = simulate_panel(spec)
    path = tmp_path / "e.csv"
    write_events(path, simulate_events(spec, truth))
    _, ufm, _ = ingest(path, "csv", CorpusConfig())
    emb, _ = embed(normalize_frequencies(ufm.counts), k=len(ufm.groups))
    return ufm.groups, emb, overlap_matrix(emb), truth


def test_full_sharing_gives_high_within_overlap(tmp_path):
    groups, _, o, truth = overlap_for(small_spec(n_weeks=150, sharing_rate=1.0, cluster_pool_size=30),
                                      tmp_path)
    idx = [groups.index(g) for g in truth["clusters"]["m"]]
    within = o[np.ix_(idx, idx)]
    assert within.min() > 0.95


def test_no_sharing_gives_zero_between_overlap(tmp_path):
    groups, _, o, truth = overlap_for(small_spec(n_weeks=60, sharing_rate=0.0), tmp_path)
    a = [groups.index(g) for g in truth["clusters"]["m"]]
    b = [groups.index(g) for g in truth["clusters"]["c"]]
    assert np.abs(o[np.ix_(a, b)]).max() < 1e-10


def test_clustering_recovers_planted_clusters(tmp_path):
    clusters = [planted_cluster(6, kind, name=f"k{i}") for i, kind in
                enumerate(["mutualism", "competition", "mutualism", "neutral"])]
    spec = SynthSpec(clusters, n_weeks=80, seed=5)
    groups, emb, _, truth = overlap_for(spec, tmp_path)
    k = emb.shape[0]
    grid = GridSpec(["kmeans"], {"kmeans": {"n_clusters": list(range(2, 8))}}, [k],
                    max_isolates=0, min_clusters=2)
    best = run_grid({k: emb}, grid)[0]
    planted = [next(i for i, gs in enumerate(truth["clusters"].values()) if g in gs) for g in groups]
    assert adjusted_rand_score(planted, best.labels) >= 0.9
