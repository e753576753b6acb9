"""Grid-searched clustering of groups in the overlap embedding.

Groups are points (columns of the embedding); every backend sees unit-length
vectors so Euclidean geometry matches cosine distance.  Candidates are
filtered by isolate and cluster-count limits and ranked by silhouette.
"""
from __future__ import annotations

import csv
import itertools
import json
import logging
from dataclasses import dataclass, field
from typing import Any, Mapping

import numpy as np

from ecokit._kernels import silhouette_samples

logger = logging.getLogger(__name__)

ALGORITHMS = ("kmeans", "dbscan", "hdbscan", "affinity-propagation")
ISOLATE = -1


class NoFeasibleClustering(RuntimeError):
    pass


@dataclass
class ClusterAssignment:
    labels: np.ndarray
    algorithm: str
    hyperparameters: dict[str, Any]
    k_dims: int
    silhouette: float
    n_clusters: int
    n_isolates: int

    def clusters(self, groups: list[str]) -> dict[int, list[str]]:
        out: dict[int, list[str]] = {}
        for g, lab in zip(groups, self.labels):
            if lab != ISOLATE:
                out.setdefault(int(lab), []).append(g)
        return dict(sorted(out.items()))


@dataclass
class GridSpec:
    """Which backends and hyperparameters to try.

    ``params`` maps an algorithm to a dict of hyperparameter lists; the grid is
    their Cartesian product.
    """

    algorithms: list[str] = field(default_factory=lambda: ["kmeans"])
    params: dict[str, dict[str, list]] = field(default_factory=dict)
    k_dims: list[int] = field(default_factory=lambda: [600])
    max_isolates: int = 5000
    min_clusters: int = 50

    def __post_init__(self):
        unknown = set(self.algorithms) - set(ALGORITHMS)
        if unknown:
            raise ValueError(f"unknown clustering algorithms {sorted(unknown)}")
        if not self.algorithms or not self.k_dims:
            raise ValueError("grid must name at least one algorithm and one k_dim")
        if self.max_isolates < 0:
            raise ValueError("max_isolates must be >= 0")

    def points(self):
        for k_dim in self.k_dims:
            for algo in self.algorithms:
                grid = self.params.get(algo, {})
                keys = sorted(grid)
                for values in itertools.product(*(grid[k] for k in keys)):
                    yield k_dim, algo, dict(zip(keys, values))

    @classmethod
    def from_dict(cls, d: Mapping) -> GridSpec:
        return cls(
            algorithms=list(d.get("algorithms", ["kmeans"])),
            params={a: dict(p) for a, p in d.get("params", {}).items()},
            k_dims=[int(k) for k in d.get("k_dims", [600])],
            max_isolates=int(d.get("max_isolates", 5000)),
            min_clusters=int(d.get("min_clusters", 50)),
        )


def _unit_rows(X):
    X = np.asarray(X, dtype=float)
    norms = np.linalg.norm(X, axis=1, keepdims=True)
    return np.divide(X, norms, out=np.zeros_like(X), where=norms > 0)


def silhouette(points, labels) -> float:
    """Mean silhouette over non-isolates with distance ``1 - cosine``.

    ``points`` has one row per group.
    """
    labels = np.asarray(labels)
    keep = labels != ISOLATE
    X = _unit_rows(np.asarray(points)[keep])
    lab = labels[keep]
    uniq, dense = np.unique(lab, return_inverse=True)
    if uniq.size < 2:
        raise ValueError("silhouette needs at least 2 clusters among non-isolates")
    return float(np.mean(silhouette_samples(X, dense, uniq.size)))


def _fit_labels(algo: str, X: np.ndarray, params: dict, seed: int) -> np.ndarray:
    from sklearn import cluster as skc

    if algo == "kmeans":
        model = skc.KMeans(init="k-means++", n_init=params.get("n_init", 10),
                           random_state=seed, **{k: v for k, v in params.items() if k != "n_init"})
    elif algo == "dbscan":
        model = skc.DBSCAN(metric="cosine", **params)
    elif algo == "hdbscan":
        model = skc.HDBSCAN(**params)
    elif algo == "affinity-propagation":
        model = skc.AffinityPropagation(random_state=seed, **params)
    else:
        raise ValueError(algo)
    labels = np.asarray(model.fit_predict(X), dtype=int)
    labels[labels < 0] = ISOLATE
    return labels


def evaluate(points, algo: str, params: dict, k_dim: int, seed: int = 0) -> ClusterAssignment:
    X = _unit_rows(points)
    labels = _fit_labels(algo, X, params, seed)
    n_iso = int(np.sum(labels == ISOLATE))
    n_clu = int(np.unique(labels[labels != ISOLATE]).size)
    try:
        sil = silhouette(X, labels)
    except ValueError:
        sil = float("nan")
    return ClusterAssignment(labels, algo, dict(params), k_dim, sil, n_clu, n_iso)


def _feasible(a: ClusterAssignment, spec: GridSpec) -> bool:
    return (np.isfinite(a.silhouette) and a.n_isolates <= spec.max_isolates
            and a.n_clusters >= spec.min_clusters)


def run_grid(embeddings: Mapping[int, np.ndarray], spec: GridSpec, seed: int = 0,
             report: list | None = None) -> list[ClusterAssignment]:
    """Evaluate every grid point and rank the feasible ones.

    ``embeddings`` maps a dimension to a ``k_dim x n_groups`` embedding.
    Ranking: silhouette descending, then fewer isolates, then more clusters,
    then grid order.  If ``report`` is a list, every evaluated candidate is
    appended to it.
    """
    evaluated = []
    for k_dim, algo, params in spec.points():
        if k_dim not in embeddings:
            raise KeyError(f"no embedding for k_dim={k_dim}")
        evaluated.append(evaluate(np.asarray(embeddings[k_dim]).T, algo, params, k_dim, seed))
    if report is not None:
        report.extend(evaluated)
    order = sorted(
        (i for i, a in enumerate(evaluated) if _feasible(a, spec)),
        key=lambda i: (-evaluated[i].silhouette, evaluated[i].n_isolates,
                       -evaluated[i].n_clusters, i),
    )
    if not order:
        near = sorted(evaluated, key=lambda a: (
            max(0, a.n_isolates - spec.max_isolates) + max(0, spec.min_clusters - a.n_clusters)))
        diag = "; ".join(
            f"{a.algorithm}{a.hyperparameters} k={a.k_dims}: clusters={a.n_clusters} "
            f"isolates={a.n_isolates} silhouette={a.silhouette:.3f}" for a in near[:3])
        raise NoFeasibleClustering(
            f"no grid point has <= {spec.max_isolates} isolates and >= {spec.min_clusters} "
            f"clusters; nearest misses: {diag}")
    return [evaluated[i] for i in order]


def purity(flags) -> float:
    """Fraction of judged groups flagged as fitting their cluster.

    ``flags`` maps group (or index) to ``"fits"``, ``"does-not-fit"`` or
    ``"unavailable"``; unavailable groups are left out.  This is the judged-fit
    fraction, not contingency-table purity.
    """
    values = flags.values() if isinstance(flags, Mapping) else flags
    fits = misfits = 0
    for f in values:
        if f == "fits":
            fits += 1
        elif f == "does-not-fit":
            misfits += 1
        elif f != "unavailable":
            raise ValueError(f"unknown purity flag {f!r}")
    if fits + misfits == 0:
        raise ValueError("no judged groups")
    return fits / (fits + misfits)


def write_labels(path, groups, labels) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["group", "cluster"])
        for g, lab in zip(groups, labels):
            w.writerow([g, int(lab)])


def read_labels(path) -> dict[str, int]:
    with open(path, newline="") as fh:
        return {row["group"]: int(row["cluster"]) for row in csv.DictReader(fh)}


def write_grid_report(path, candidates, spec: GridSpec) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["algorithm", "hyperparameters", "k_dims", "silhouette",
                    "n_clusters", "n_isolates", "feasible"])
        for a in candidates:
            w.writerow([a.algorithm, json.dumps(a.hyperparameters, sort_keys=True), a.k_dims,
                        repr(a.silhouette), a.n_clusters, a.n_isolates, int(_feasible(a, spec))])
