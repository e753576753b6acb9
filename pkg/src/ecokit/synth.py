"""Synthetic panels and event corpora with planted interaction matrices.

Each cluster is a VAR(1) on log size, run forward from zero with Gaussian
shocks; a group's series is 0 before its creation week and at least
``log 2`` (one user) afterwards.  Event corpora turn the planted sizes into
weekly distinct users drawn from a cluster-shared pool (probability
``sharing_rate``), a small global pool (``global_rate``) or the group's own
private pool.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from ecokit._kernels import var_recursion
from ecokit.ingest import WEEK_SECONDS, EventRecord, GroupPanel

# Monday 2018-01-01 00:00 UTC
DEFAULT_START = 1514764800


@dataclass
class ClusterSpec:
    phi: list[list[float]]
    intercept: list[float]
    trend: list[float] | None = None
    creation: list[int] | None = None
    noise_sd: float = 0.1
    name: str | None = None

    @property
    def size(self) -> int:
        return len(self.phi)


@dataclass
class SynthSpec:
    clusters: list[ClusterSpec]
    n_weeks: int = 260
    seed: int = 0
    start_ts: float = DEFAULT_START
    allow_unstable: bool = False
    # event-level generation
    cluster_pool_size: int = 200
    private_pool_size: int = 100
    global_pool_size: int = 2000
    sharing_rate: float = 0.7
    global_rate: float = 0.0
    extra_comments: float = 0.4

    def __post_init__(self):
        self.clusters = [c if isinstance(c, ClusterSpec) else ClusterSpec(**c) for c in self.clusters]
        for c in self.clusters:
            phi = np.asarray(c.phi, dtype=float)
            if phi.shape != (c.size, c.size) or len(c.intercept) != c.size:
                raise ValueError("cluster phi must be square and match intercept length")
            if c.noise_sd < 0:
                raise ValueError("noise_sd must be >= 0")
            rho = np.max(np.abs(np.linalg.eigvals(phi)))
            if rho >= 1 and not self.allow_unstable:
                raise ValueError(f"planted phi has spectral radius {rho:.3f} >= 1")
        if not 0 <= self.sharing_rate <= 1 or not 0 <= self.global_rate <= 1:
            raise ValueError("rates must lie in [0, 1]")
        if self.sharing_rate + self.global_rate > 1:
            raise ValueError("sharing_rate + global_rate must be <= 1")

    @property
    def n_clusters(self) -> int:
        return len(self.clusters)

    def cluster_name(self, ci: int) -> str:
        return self.clusters[ci].name or f"c{ci}"

    def group_names(self, ci: int) -> list[str]:
        return [f"{self.cluster_name(ci)}_g{j}" for j in range(self.clusters[ci].size)]

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d) -> SynthSpec:
        return cls(**d)

    @classmethod
    def from_json(cls, path) -> SynthSpec:
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def interaction_matrix(n: int, diag: float, offdiag: float) -> list[list[float]]:
    """``diag`` on the diagonal and ``offdiag`` everywhere else."""
    m = np.full((n, n), float(offdiag))
    np.fill_diagonal(m, diag)
    return m.tolist()


def planted_cluster(n: int, kind: str, level: float = 2.5, noise_sd: float = 0.1,
                    strength: float = 0.05, name: str | None = None) -> ClusterSpec:
    """A cluster of ``n`` members whose stationary log size is ``level``.

    ``kind`` is ``"mutualism"`` (positive off-diagonals), ``"competition"``
    (negative) or ``"neutral"`` (diagonal ``phi``).
    """
    if kind == "mutualism":
        phi = interaction_matrix(n, 0.4, strength)
    elif kind == "competition":
        phi = interaction_matrix(n, 0.6, -strength)
    elif kind == "neutral":
        phi = interaction_matrix(n, 0.5, 0.0)
    else:
        raise ValueError(f"unknown cluster kind {kind!r}")
    row = np.asarray(phi).sum(axis=1)
    intercept = (level * (1 - row)).tolist()
    return ClusterSpec(phi, intercept, [0.0] * n, [0] * n, noise_sd, name)


def _simulate_cluster(c: ClusterSpec, n_weeks: int, rng) -> np.ndarray:
    M = c.size
    phi = np.asarray(c.phi, dtype=float)
    trend = np.zeros(M) if c.trend is None else np.asarray(c.trend, dtype=float)
    creation = np.zeros(M, dtype=int) if c.creation is None else np.asarray(c.creation, dtype=int)
    t = np.arange(n_weeks, dtype=float)
    base = np.asarray(c.intercept, dtype=float)[None, :] + trend[None, :] * t[:, None]
    shocks = rng.normal(0.0, c.noise_sd, size=(1, n_weeks, M)) if c.noise_sd > 0 \
        else np.zeros((1, n_weeks, M))
    active = (t[:, None] >= creation[None, :]).astype(np.uint8)
    y = var_recursion(base, phi, np.zeros((1, M)), shocks, active)[0, 1:]
    floor = math.log(2)
    return np.where(active.astype(bool), np.maximum(y, floor), 0.0).T


def round_half_up(x):
    return np.floor(np.asarray(x) + 0.5)


def simulate_panel(spec: SynthSpec) -> tuple[GroupPanel, dict]:
    """Simulate every cluster; returns the panel and the planted truth."""
    groups, rows, clusters = [], [], {}
    for ci, c in enumerate(spec.clusters):
        rng = np.random.default_rng([spec.seed, ci])
        y = _simulate_cluster(c, spec.n_weeks, rng)
        names = spec.group_names(ci)
        groups += names
        rows.append(y)
        clusters[spec.cluster_name(ci)] = names
    sizes = np.vstack(rows)
    creation = np.array([int(np.flatnonzero(r)[0]) for r in sizes])
    counts = round_half_up(np.expm1(sizes)).astype(int)
    counts[(sizes > 0) & (counts < 1)] = 1
    truth = {
        "spec": spec.to_dict(),
        "groups": groups,
        "clusters": clusters,
        "phi": {spec.cluster_name(ci): c.phi for ci, c in enumerate(spec.clusters)},
        "counts": counts.tolist(),
    }
    return GroupPanel(groups, sizes, creation, float(spec.start_ts)), truth


def simulate_events(spec: SynthSpec, truth: dict | None = None) -> list[EventRecord]:
    """Event corpus whose weekly distinct users equal the planted counts."""
    if truth is None:
        _, truth = simulate_panel(spec)
    counts = np.asarray(truth["counts"], dtype=int)
    events = []
    row = 0
    for ci, c in enumerate(spec.clusters):
        cname = spec.cluster_name(ci)
        rng = np.random.default_rng([spec.seed, ci, 1])
        cpool = np.array([f"{cname}_u{k}" for k in range(spec.cluster_pool_size)])
        gpool = np.array([f"x_u{k}" for k in range(spec.global_pool_size)])
        for j, g in enumerate(spec.group_names(ci)):
            ppool = np.array([f"{g}_p{k}" for k in range(spec.private_pool_size)])
            for t, n in enumerate(counts[row]):
                if n == 0:
                    continue
                src = rng.choice(3, size=n, p=[spec.sharing_rate, spec.global_rate,
                                               1 - spec.sharing_rate - spec.global_rate])
                users = []
                for pool, code in ((cpool, 0), (gpool, 1), (ppool, 2)):
                    k = int(np.sum(src == code))
                    if k > pool.size:
                        raise ValueError(f"user pool too small for {k} distinct users")
                    if k:
                        users.extend(rng.choice(pool, size=k, replace=False))
                n_comments = 1 + rng.poisson(spec.extra_comments, size=len(users))
                week = spec.start_ts + t * WEEK_SECONDS
                for u, m in zip(users, n_comments):
                    for ts in rng.integers(0, WEEK_SECONDS, size=m):
                        events.append(EventRecord(str(u), g, float(week + ts)))
            row += 1
    events.sort(key=lambda e: (e.timestamp, e.group, e.user))
    return events


def write_events(path, events, format: str = "csv") -> None:
    with open(path, "w", newline="") as fh:
        if format == "csv":
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["user", "group", "ts"])
            for e in events:
                w.writerow([e.user, e.group, int(e.timestamp)])
        elif format == "ndjson":
            for e in events:
                fh.write(json.dumps({"user": e.user, "group": e.group, "ts": int(e.timestamp)}) + "\n")
        else:
            raise ValueError(f"unknown format {format!r}")


def write_truth(path, truth) -> None:
    with open(path, "w") as fh:
        json.dump(truth, fh, indent=1, sort_keys=True)
        fh.write("\n")


def read_truth(path) -> dict:
    with open(path) as fh:
        return json.load(fh)
