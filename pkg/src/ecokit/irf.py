"""Impulse responses, bootstrap bands and competition-mutualism networks.

``theta[t, i, j]`` is the response of member ``i`` at horizon ``t`` to a
one-log-unit impulse in member ``j``, i.e. ``(phi ** t)[i, j]`` with the
``phi[i, j]`` = "effect of ``j`` on ``i``" convention of :mod:`ecokit.var`.
A network edge ``j -> i`` is drawn when the band for ``theta[t, i, j]``
excludes zero at some horizon ``1 <= t <= 10``.
"""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from ecokit import var as varmod
from ecokit._kernels import var_recursion

logger = logging.getLogger(__name__)

EDGE_HORIZON = 10
MUTUALISM = "mutualism"
COMPETITION = "competition"


class BootstrapError(RuntimeError):
    pass


@dataclass
class IrfResult:
    members: list[str]
    point: np.ndarray  # (L+1, M, M)
    lower: np.ndarray
    upper: np.ndarray
    n_replicates: int
    n_dropped: int = 0
    level: float = 0.95

    @property
    def horizon(self) -> int:
        return self.point.shape[0] - 1

    def band_violations(self) -> int:
        return int(np.sum((self.point < self.lower - 1e-12) | (self.point > self.upper + 1e-12)))


@dataclass
class Edge:
    source: str
    target: str
    sign: str
    first_horizon: int
    evidence: list[tuple[int, float, float, float]]  # (t, theta, lower, upper)
    sign_mixed: bool = False


@dataclass
class EcoNetwork:
    nodes: list[str]
    edges: list[Edge] = field(default_factory=list)
    m_bar: float = float("nan")
    kappa: float = float("nan")

    def to_networkx(self):
        import networkx as nx

        G = nx.DiGraph(m_bar=float(self.m_bar), kappa=float(self.kappa))
        G.add_nodes_from(self.nodes)
        for e in self.edges:
            G.add_edge(
                e.source, e.target, sign=e.sign, first_horizon=e.first_horizon,
                theta=float(e.evidence[0][1]), sign_mixed=e.sign_mixed,
                horizons=" ".join(str(t) for t, *_ in e.evidence),
                evidence=";".join(f"{t}:{th:.6g}[{lo:.6g},{hi:.6g}]" for t, th, lo, hi in e.evidence),
            )
        return G

    def write_graphml(self, path) -> None:
        import networkx as nx

        nx.write_graphml(self.to_networkx(), path)

    def to_dot(self, name="cluster") -> str:
        colors = {MUTUALISM: "purple", COMPETITION: "goldenrod"}
        lines = [f"digraph {_dot_id(name)} {{",
                 f'  graph [m_bar="{self.m_bar:.6g}", kappa="{self.kappa:.6g}"];']
        for n in self.nodes:
            lines.append(f"  {_dot_id(n)};")
        for e in self.edges:
            ev = ";".join(f"{t}:{th:.4g}" for t, th, *_ in e.evidence)
            lines.append(
                f"  {_dot_id(e.source)} -> {_dot_id(e.target)} [sign={e.sign}, "
                f'color={colors[e.sign]}, first_horizon={e.first_horizon}, '
                f'sign_mixed={str(e.sign_mixed).lower()}, evidence="{ev}"];')
        lines.append("}")
        return "\n".join(lines) + "\n"


def _dot_id(s) -> str:
    s = str(s).replace("\\", "\\\\").replace('"', '\\"')
    return f'"{s}"'


def irf(phi, horizon: int) -> np.ndarray:
    """Return ``theta`` with ``theta[0] = I`` and ``theta[t] = theta[t-1] @ phi``."""
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    phi = np.asarray(phi, dtype=float)
    out = np.empty((horizon + 1,) + phi.shape)
    out[0] = np.eye(phi.shape[0])
    for t in range(1, horizon + 1):
        out[t] = out[t - 1] @ phi
    return out


def bootstrap_irf(fit, horizon: int = EDGE_HORIZON, replicates: int = 1000, seed: int = 0,
                  level: float = 0.95, max_drop: float = 0.10) -> IrfResult:
    """Percentile bands from a recursive residual bootstrap.

    Residual rows are resampled jointly across equations, the series rebuilt
    from the fitted parameters starting at the observed first week, the model
    refitted and its impulse responses recomputed.  Replicate ``r`` draws from
    its own stream seeded by ``(seed, r)``.
    """
    if replicates < 100:
        raise ValueError("need at least 100 bootstrap replicates")
    n, M = fit.y.shape
    resid = fit.residuals[np.all(np.isfinite(fit.residuals), axis=1)]
    resid = resid - resid.mean(axis=0)
    base = fit.deterministic(np.arange(1, n))
    shocks = np.empty((replicates, n - 1, M))
    for r in range(replicates):
        rng = np.random.default_rng([seed, r])
        shocks[r] = resid[rng.integers(0, resid.shape[0], n - 1)]
    y0 = np.repeat(fit.y[:1], replicates, axis=0)
    paths = var_recursion(base, fit.phi, y0, shocks)

    restricted = fit.kind == "baseline"
    thetas = np.empty((replicates, horizon + 1, M, M))
    ok = np.ones(replicates, dtype=bool)
    for r in range(replicates):
        try:
            est = varmod.estimate(paths[r], fit.creation, restricted, fit.members,
                                  fit.include_precreation)
        except varmod.SingularDesignError:
            ok[r] = False
            continue
        thetas[r] = irf(est["phi"], horizon)
    dropped = int((~ok).sum())
    if dropped > max_drop * replicates:
        raise BootstrapError(f"{dropped} of {replicates} bootstrap refits were singular")
    if dropped:
        logger.warning("dropped %d singular bootstrap replicates", dropped)
    alpha = (1 - level) / 2 * 100
    lower, upper = np.percentile(thetas[ok], [alpha, 100 - alpha], axis=0)
    res = IrfResult(list(fit.members), irf(fit.phi, horizon), lower, upper,
                    int(ok.sum()), dropped, level)
    bad = res.band_violations()
    if bad:
        logger.info("%d IRF cells fall outside their percentile band", bad)
    return res


def extract_network(res: IrfResult, max_horizon: int = EDGE_HORIZON) -> EcoNetwork:
    """Signed edges from impulse responses whose band excludes zero.

    The edge sign is the sign of the band at the first significant horizon;
    edges whose significant horizons disagree in sign are flagged
    ``sign_mixed``.
    """
    if res.horizon < max_horizon:
        raise ValueError(f"IRF horizon {res.horizon} < {max_horizon}")
    M = len(res.members)
    edges = []
    for j in range(M):  # impulse
        for i in range(M):  # response
            if i == j:
                continue
            evidence = []
            for t in range(1, max_horizon + 1):
                lo, hi = res.lower[t, i, j], res.upper[t, i, j]
                if lo > 0 or hi < 0:
                    evidence.append((t, float(res.point[t, i, j]), float(lo), float(hi)))
            if not evidence:
                continue
            signs = {1 if ev[2] > 0 else -1 for ev in evidence}
            first = 1 if evidence[0][2] > 0 else -1
            edges.append(Edge(res.members[j], res.members[i],
                              MUTUALISM if first > 0 else COMPETITION,
                              evidence[0][0], evidence, len(signs) > 1))
    return EcoNetwork(list(res.members), edges)


def cluster_metrics(phi, normalizer: str = "rows") -> tuple[float, float]:
    """Average ecological interaction and interaction strength.

    Sums of signed and absolute off-diagonal coefficients divided by
    ``|M| - 1`` (``normalizer="rows"``) or by ``|M| (|M| - 1)``
    (``normalizer="pairs"``).
    """
    phi = np.asarray(phi, dtype=float)
    M = phi.shape[0]
    if M < 2:
        raise ValueError("need at least 2 members")
    off = phi[~np.eye(M, dtype=bool)]
    if normalizer == "rows":
        denom = M - 1
    elif normalizer == "pairs":
        denom = M * (M - 1)
    else:
        raise ValueError(f"unknown normalizer {normalizer!r}")
    return float(off.sum() / denom), float(np.abs(off).sum() / denom)


def typology_report(metrics: dict, bins: int = 20) -> dict:
    """Summaries over clusters of ``metrics[cid] = (m_bar, kappa)``."""
    if len(metrics) < 2:
        raise ValueError("need at least 2 clusters")
    cids = sorted(metrics)
    m = np.array([metrics[c][0] for c in cids])
    k = np.array([metrics[c][1] for c in cids])
    if np.ptp(m) == 0:
        t_stat = p_val = None
    else:
        tt = stats.ttest_1samp(m, 0.0)
        t_stat, p_val = float(tt.statistic), float(tt.pvalue)
    if np.ptp(m) == 0 or np.ptp(k) == 0:
        rho = None
    else:
        rho = float(stats.spearmanr(m, k).statistic)
    counts, xe, ye = np.histogram2d(m, k, bins=bins)
    return {
        "table": [{"cluster": c, "m_bar": float(a), "kappa": float(b)} for c, a, b in zip(cids, m, k)],
        "n_clusters": len(cids),
        "mean_m_bar": float(m.mean()),
        "mutualistic_fraction": float(np.mean(m > 0)),
        "competitive_fraction": float(np.mean(m < 0)),
        "t_statistic": t_stat,
        "t_pvalue": p_val,
        "spearman_rho": rho,
        "histogram": {"counts": counts.tolist(), "m_bar_edges": xe.tolist(), "kappa_edges": ye.tolist()},
    }


def write_metrics_csv(path, metrics: dict, networks: dict | None = None) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["cluster", "m_bar", "kappa", "n_members", "n_edges", "n_mutualism", "n_competition"])
        for cid in sorted(metrics):
            m, k = metrics[cid]
            net = (networks or {}).get(cid)
            if net is None:
                w.writerow([cid, repr(m), repr(k), "", "", "", ""])
                continue
            signs = [e.sign for e in net.edges]
            w.writerow([cid, repr(m), repr(k), len(net.nodes), len(signs),
                        signs.count(MUTUALISM), signs.count(COMPETITION)])


def write_histogram_csv(path, hist: dict) -> None:
    xe, ye, counts = hist["m_bar_edges"], hist["kappa_edges"], hist["counts"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["m_bar_lo", "m_bar_hi", "kappa_lo", "kappa_hi", "count"])
        for a in range(len(xe) - 1):
            for b in range(len(ye) - 1):
                w.writerow([repr(xe[a]), repr(xe[a + 1]), repr(ye[b]), repr(ye[b + 1]),
                            int(counts[a][b])])
