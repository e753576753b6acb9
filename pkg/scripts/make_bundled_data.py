"""Regenerate the synthetic data files shipped in ``src/ecokit/data``."""
import json
from pathlib import Path

from ecokit import synth

DATA = Path(__file__).resolve().parents[1] / "src" / "ecokit" / "data"


def e2e_spec():
    kinds = ["mutualism", "competition", "mutualism", "competition", "mutualism"]
    clusters = [synth.planted_cluster(10, k, name=f"c{i}") for i, k in enumerate(kinds)]
    return synth.SynthSpec(clusters, n_weeks=260, seed=1)


def mini_spec():
    clusters = [synth.planted_cluster(5, "mutualism", level=2.0, name="a"),
                synth.planted_cluster(5, "competition", level=2.0, name="b")]
    return synth.SynthSpec(clusters, n_weeks=20, seed=7, cluster_pool_size=40,
                           private_pool_size=20)


def main():
    DATA.mkdir(parents=True, exist_ok=True)
    with open(DATA / "synth_e2e.json", "w") as fh:
        json.dump(e2e_spec().to_dict(), fh, indent=1)
        fh.write("\n")
    events = synth.simulate_events(mini_spec())[:1000]
    synth.write_events(DATA / "mini_corpus.csv", events)
    cfg = {
        "events": "events.csv",
        "out_dir": "run",
        "seed": 0,
        "ingest": {"top_n": 100},
        "overlap": {"k": 600},
        "cluster": {"algorithms": ["kmeans", "dbscan"],
                    "params": {"kmeans": {"n_clusters": [2, 3, 4, 5, 6, 7, 8]},
                               "dbscan": {"eps": [0.1, 0.3], "min_samples": [3]}},
                    "max_isolates": 10, "min_clusters": 2},
        "irf": {"horizon": 10, "replicates": 1000},
    }
    with open(DATA / "e2e_config.json", "w") as fh:
        json.dump(cfg, fh, indent=1)
        fh.write("\n")


if __name__ == "__main__":
    main()
