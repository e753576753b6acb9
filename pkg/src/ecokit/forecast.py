"""Out-of-sample forecasts from fitted VAR/baseline models, RMSE and CRPS."""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.special import erf

logger = logging.getLogger(__name__)

CI_68_Z = 1.0  # the 68.2% interval is mean +/- 1 sd


@dataclass
class Forecast:
    members: list[str]
    model: str
    mean: np.ndarray  # H x M
    sd: np.ndarray  # H x M
    covariance: np.ndarray  # H x M x M
    unstable: bool = False

    @property
    def horizon(self) -> int:
        return self.mean.shape[0]

    @classmethod
    def from_interval(cls, members, model, mean, half_width_68):
        """Build from 68.2% interval half-widths (one standard deviation)."""
        sd = np.asarray(half_width_68, dtype=float) / CI_68_Z
        cov = np.stack([np.diag(s ** 2) for s in sd])
        return cls(list(members), model, np.asarray(mean, dtype=float), sd, cov)


def forecast(fit, H: int) -> Forecast:
    """Iterated mean forecast and innovation-only forecast covariance.

    ``V_h = sum_{i<h} phi^i Sigma phi^i'``; parameter uncertainty is ignored.
    """
    if H < 1:
        raise ValueError("H must be >= 1")
    M = fit.n_members
    T = fit.last_t
    steps = np.arange(T + 1, T + H + 1)
    base = fit.deterministic(steps)
    mean = np.empty((H, M))
    prev = fit.y[-1]
    for h in range(H):
        prev = base[h] + fit.phi @ prev
        mean[h] = prev
    cov = np.empty((H, M, M))
    P = np.eye(M)
    acc = np.zeros((M, M))
    for h in range(H):
        acc = acc + P @ fit.sigma @ P.T
        cov[h] = (acc + acc.T) / 2
        P = P @ fit.phi
    sd = np.sqrt(np.clip(np.diagonal(cov, axis1=1, axis2=2), 0, None))
    unstable = not fit.stable
    if unstable:
        logger.warning("forecasting from an unstable fit (spectral radius %.3f)", fit.spectral_radius)
    return Forecast(list(fit.members), fit.kind, mean, sd, cov, unstable)


def actuals_for(fit, panel, H: int) -> np.ndarray:
    """Observed holdout values aligned with ``forecast(fit, H)``."""
    idx = [panel.groups.index(g) for g in fit.members]
    start = fit.window_start + fit.n_obs
    out = panel.sizes[idx, start:start + H].T
    if out.shape[0] != H:
        raise ValueError(f"panel has only {out.shape[0]} holdout weeks, need {H}")
    return out


def _mean_of(f):
    return f.mean if isinstance(f, Forecast) else np.asarray(f, dtype=float)


def rmse(forecasts, actuals, pooled: bool = True) -> float:
    """Root mean squared error pooled over every cell.

    With ``pooled=False`` the per-group (column) RMSEs are averaged instead.
    """
    mu, y = _mean_of(forecasts), np.asarray(actuals, dtype=float)
    if mu.shape != y.shape:
        raise ValueError(f"shape mismatch {mu.shape} vs {y.shape}")
    err = (mu - y) ** 2
    if pooled:
        return float(np.sqrt(err.mean()))
    return float(np.sqrt(err.reshape(-1, err.shape[-1]).mean(axis=0)).mean())


def crps_normal(y, mu, sigma) -> np.ndarray:
    """Closed-form CRPS of ``N(mu, sigma^2)`` at ``y``; ``|y - mu|`` when sigma is 0."""
    y, mu, sigma = np.broadcast_arrays(*(np.asarray(a, dtype=float) for a in (y, mu, sigma)))
    shape = y.shape
    y, mu, sigma = y.ravel(), mu.ravel(), sigma.ravel()
    out = np.abs(y - mu)
    pos = sigma > 0
    z = (y[pos] - mu[pos]) / sigma[pos]
    cdf = 0.5 * (1 + erf(z / np.sqrt(2)))
    pdf = np.exp(-0.5 * z * z) / np.sqrt(2 * np.pi)
    out[pos] = sigma[pos] * (z * (2 * cdf - 1) + 2 * pdf - 1 / np.sqrt(np.pi))
    return out.reshape(shape)


def crps(forecasts: Forecast, actuals) -> float:
    """Sum of per-cell normal CRPS."""
    y = np.asarray(actuals, dtype=float)
    if forecasts.mean.shape != y.shape:
        raise ValueError(f"shape mismatch {forecasts.mean.shape} vs {y.shape}")
    return float(crps_normal(y, forecasts.mean, forecasts.sd).sum())


def _winner(var_score, base_score, tol=0.0):
    if abs(var_score - base_score) <= tol:
        return "tie"
    return "var" if var_score < base_score else "baseline"


def score_cluster(var_fc: Forecast, base_fc: Forecast, actuals) -> dict:
    err_v = ((var_fc.mean - actuals) ** 2).ravel()
    err_b = ((base_fc.mean - actuals) ** 2).ravel()
    return {
        "n_cells": int(actuals.size),
        "sse_var": float(err_v.sum()),
        "sse_baseline": float(err_b.sum()),
        "rmse_var": rmse(var_fc, actuals),
        "rmse_baseline": rmse(base_fc, actuals),
        "crps_var": crps(var_fc, actuals),
        "crps_baseline": crps(base_fc, actuals),
    }


def compare(var_scores: dict, baseline_scores: dict | None = None) -> dict:
    """Global winner per metric and paired per-cluster differences.

    Either pass per-cluster dicts from :func:`score_cluster` as ``var_scores``
    (``baseline_scores`` omitted), or two dicts of global totals with keys
    ``rmse`` and ``crps``.
    """
    if baseline_scores is not None:
        v, b = var_scores, baseline_scores
        return {
            "rmse": {"var": v["rmse"], "baseline": b["rmse"], "winner": _winner(v["rmse"], b["rmse"])},
            "crps": {"var": v["crps"], "baseline": b["crps"], "winner": _winner(v["crps"], b["crps"])},
            "clusters": {},
        }
    per = var_scores
    if not per:
        raise ValueError("no clusters to compare")
    cells = sum(s["n_cells"] for s in per.values())
    rm_v = float(np.sqrt(sum(s["sse_var"] for s in per.values()) / cells))
    rm_b = float(np.sqrt(sum(s["sse_baseline"] for s in per.values()) / cells))
    cr_v = float(sum(s["crps_var"] for s in per.values()))
    cr_b = float(sum(s["crps_baseline"] for s in per.values()))
    clusters = {
        cid: {**s, "rmse_diff": s["rmse_var"] - s["rmse_baseline"],
              "crps_diff": s["crps_var"] - s["crps_baseline"]}
        for cid, s in sorted(per.items())
    }
    return {
        "rmse": {"var": rm_v, "baseline": rm_b, "winner": _winner(rm_v, rm_b)},
        "crps": {"var": cr_v, "baseline": cr_b, "winner": _winner(cr_v, cr_b)},
        "clusters": clusters,
        "n_cells": cells,
    }
