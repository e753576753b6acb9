"""VAR(1) models of weekly log group size for one cluster.

Each member ``j`` gets its own least-squares equation::

    y[j, t] = b0[j] + b1[j] * t + a[j] * x[j, t] + sum_k phi[j, k] * y[k, t-1] + e[j, t]

where ``t`` counts weeks from the earliest member's creation and the
counter-trend ``x[j, t] = t`` before group ``j`` is created (0 afterwards), so
the fitted trend only applies once the group exists.  ``phi[j, k]`` is the
effect of group ``k``'s lagged size on group ``j``; column ``k`` of ``phi`` is
the influence of group ``k``.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

logger = logging.getLogger(__name__)

DEFAULT_MIN_WEEKS = 156
DEFAULT_HOLDOUT = 24
RANK_TOL = 1e-10


class SingularDesignError(np.linalg.LinAlgError):
    """A design matrix is rank deficient; ``columns`` names the offenders."""

    def __init__(self, message, columns=()):
        super().__init__(message)
        self.columns = list(columns)


@dataclass
class VarSpec:
    members: list[str]
    holdout: int = DEFAULT_HOLDOUT
    min_weeks: int = DEFAULT_MIN_WEEKS
    include_precreation: bool = True


@dataclass
class VarFit:
    members: list[str]
    kind: str  # "var" or "baseline"
    window_start: int  # panel week of relative t = 0
    creation: np.ndarray  # relative creation week per member
    y: np.ndarray = field(repr=False)  # n x M training data, rows t = 0..n-1
    phi: np.ndarray
    intercept: np.ndarray
    trend: np.ndarray
    counter: np.ndarray  # diagonal counter-trend coefficients (0 when not estimated)
    sigma: np.ndarray
    phi_se: np.ndarray
    intercept_se: np.ndarray
    trend_se: np.ndarray
    counter_se: np.ndarray
    residuals: np.ndarray = field(repr=False)  # (n-1) x M, NaN on excluded rows
    n_params: np.ndarray
    include_precreation: bool = True

    @property
    def n_members(self) -> int:
        return len(self.members)

    @property
    def n_obs(self) -> int:
        return self.y.shape[0]

    @property
    def last_t(self) -> int:
        return self.n_obs - 1

    @property
    def rss(self) -> np.ndarray:
        return np.nansum(self.residuals ** 2, axis=0)

    @property
    def spectral_radius(self) -> float:
        return float(np.max(np.abs(np.linalg.eigvals(self.phi))))

    @property
    def stable(self) -> bool:
        return self.spectral_radius < 1

    def counter_regressor(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        return np.where(t[:, None] < self.creation[None, :], t[:, None], 0.0)

    def deterministic(self, t) -> np.ndarray:
        """Intercept + trend + counter-trend part for each time in ``t``."""
        t = np.asarray(t, dtype=float)
        return (self.intercept[None, :] + self.trend[None, :] * t[:, None]
                + self.counter[None, :] * self.counter_regressor(t))

    def phi_conf_int(self, level=0.95):
        from scipy import stats
        df = max(int(self.n_obs - 1 - self.n_params.max()), 1)
        q = stats.t.ppf(0.5 + level / 2, df)
        return self.phi - q * self.phi_se, self.phi + q * self.phi_se

    def to_dict(self) -> dict:
        mats = {k: _mat(getattr(self, k)) for k in (
            "creation", "y", "phi", "intercept", "trend", "counter", "sigma", "phi_se",
            "intercept_se", "trend_se", "counter_se", "residuals", "n_params")}
        return {
            "members": list(self.members),
            "kind": self.kind,
            "window_start": int(self.window_start),
            "include_precreation": self.include_precreation,
            "sigma_denominator": "T - p (per-equation parameter count)",
            "spectral_radius": self.spectral_radius,
            **mats,
        }

    @classmethod
    def from_dict(cls, d) -> VarFit:
        arr = {k: _unmat(d[k]) for k in (
            "creation", "y", "phi", "intercept", "trend", "counter", "sigma", "phi_se",
            "intercept_se", "trend_se", "counter_se", "residuals", "n_params")}
        arr["creation"] = arr["creation"].astype(int)
        arr["n_params"] = arr["n_params"].astype(int)
        return cls(members=list(d["members"]), kind=d["kind"], window_start=int(d["window_start"]),
                   include_precreation=bool(d.get("include_precreation", True)), **arr)


def _mat(a):
    a = np.asarray(a, dtype=float)
    data = [None if not np.isfinite(v) else float(v) for v in a.ravel()]
    return {"shape": list(a.shape), "data": data}


def _unmat(d):
    return np.array([np.nan if v is None else v for v in d["data"]], dtype=float).reshape(d["shape"])


def prepare(panel, spec: VarSpec):
    """Slice the training window for ``spec.members``.

    Returns ``(members, window_start, y, creation)`` with members lacking
    ``spec.min_weeks`` weeks of history before the holdout dropped.
    """
    sub = panel.subset(spec.members)
    t_train = panel.n_weeks - spec.holdout
    if t_train < 3:
        raise ValueError("training window too short")
    history = t_train - sub.creation_week
    keep = history >= spec.min_weeks
    if not keep.all():
        dropped = [g for g, k in zip(sub.groups, keep) if not k]
        logger.info("dropping %d members with < %d weeks of activity: %s",
                    len(dropped), spec.min_weeks, dropped)
    members = [g for g, k in zip(sub.groups, keep) if k]
    if len(members) < 2:
        raise ValueError(f"cluster has {len(members)} members with enough history; need >= 2")
    idx = np.flatnonzero(keep)
    start = int(sub.creation_week[idx].min())
    y = sub.sizes[idx, start:t_train].T.copy()
    creation = sub.creation_week[idx] - start
    for j in range(y.shape[1]):
        if not np.any(y[:, j]):
            raise ValueError(f"member {members[j]!r} has an all-zero training series")
    return members, start, y, creation


def design(y, creation, eq: int, restricted: bool = False, members=None):
    """Regressors and names for equation ``eq`` over rows ``t = 1..n-1``.

    An all-zero counter-trend column (group present from ``t <= 1``) is left
    out, so its coefficient is fixed at 0.
    """
    n, M = y.shape
    names = members if members is not None else [str(k) for k in range(M)]
    t = np.arange(1, n, dtype=float)
    cols = [np.ones(n - 1), t]
    labels = ["const", "trend"]
    x = np.where(t < creation[eq], t, 0.0)
    if np.any(x):
        cols.append(x)
        labels.append(f"counter:{names[eq]}")
    lags = [eq] if restricted else range(M)
    for k in lags:
        cols.append(y[:-1, k])
        labels.append(f"lag:{names[k]}")
    return np.column_stack(cols), labels


def _check_rank(X, labels):
    R, piv = scipy.linalg.qr(X, mode="r", pivoting=True)
    d = np.abs(np.diag(R))
    rank = int(np.sum(d > RANK_TOL * d[0])) if d.size and d[0] > 0 else 0
    if rank < X.shape[1]:
        bad = [labels[i] for i in piv[rank:]]
        raise SingularDesignError(
            f"design has rank {rank} < {X.shape[1]} columns; collinear: {bad}", bad)


def _solve(X, yv, check=True, labels=None):
    if check:
        _check_rank(X, labels)
    beta, *_ = np.linalg.lstsq(X, yv, rcond=None)
    return beta


def estimate(y, creation, restricted=False, members=None, include_precreation=True, check=True):
    """Least-squares estimates for every equation. Returns a dict of arrays."""
    n, M = y.shape
    phi = np.zeros((M, M))
    phi_se = np.zeros((M, M))
    b0, b1, a = np.zeros(M), np.zeros(M), np.zeros(M)
    b0_se, b1_se, a_se = np.zeros(M), np.zeros(M), np.full(M, np.nan)
    resid = np.full((n - 1, M), np.nan)
    n_params = np.zeros(M, dtype=int)
    t = np.arange(1, n)
    for j in range(M):
        X, labels = design(y, creation, j, restricted, members)
        rows = slice(None) if include_precreation else t >= creation[j]
        if not include_precreation:
            keep = [i for i, lab in enumerate(labels) if not lab.startswith("counter:")]
            X, labels = X[:, keep], [labels[i] for i in keep]
        Xj, yj = X[rows], y[1:, j][rows]
        beta = _solve(Xj, yj, check, labels)
        e = yj - Xj @ beta
        resid[rows, j] = e
        p = Xj.shape[1]
        n_params[j] = p
        dof = Xj.shape[0] - p
        s2 = float(e @ e) / dof if dof > 0 else np.nan
        se = np.sqrt(np.clip(np.diag(np.linalg.inv(Xj.T @ Xj)), 0, None) * s2)
        b0[j], b1[j] = beta[0], beta[1]
        b0_se[j], b1_se[j] = se[0], se[1]
        off = 2
        if labels[2].startswith("counter:"):
            a[j], a_se[j] = beta[2], se[2]
            off = 3
        if restricted:
            phi[j, j], phi_se[j, j] = beta[off], se[off]
        else:
            phi[j], phi_se[j] = beta[off:], se[off:]
    return {"phi": phi, "phi_se": phi_se, "intercept": b0, "trend": b1, "counter": a,
            "intercept_se": b0_se, "trend_se": b1_se, "counter_se": a_se,
            "residuals": resid, "n_params": n_params}


def residual_covariance(resid, n_params):
    """Cross-covariance with denominator ``sqrt((T - p_i)(T - p_j))``."""
    M = resid.shape[1]
    sigma = np.zeros((M, M))
    for i in range(M):
        for j in range(i, M):
            ok = np.isfinite(resid[:, i]) & np.isfinite(resid[:, j])
            T = ok.sum()
            denom = np.sqrt(max(T - n_params[i], 1) * max(T - n_params[j], 1))
            sigma[i, j] = sigma[j, i] = resid[ok, i] @ resid[ok, j] / denom
    return sigma


def _fit(panel, spec: VarSpec, restricted: bool) -> VarFit:
    members, start, y, creation = prepare(panel, spec)
    est = estimate(y, creation, restricted, members, spec.include_precreation)
    sigma = residual_covariance(est["residuals"], est["n_params"])
    return VarFit(members=members, kind="baseline" if restricted else "var", window_start=start,
                  creation=creation, y=y, sigma=sigma,
                  include_precreation=spec.include_precreation, **est)


def fit_var(panel, spec: VarSpec) -> VarFit:
    """Fit the full VAR(1): every equation sees every member's lag."""
    return _fit(panel, spec, restricted=False)


def fit_baseline(panel, spec: VarSpec) -> VarFit:
    """Fit independent AR(1) equations (off-diagonal ``phi`` fixed at 0)."""
    return _fit(panel, spec, restricted=True)


def fit_clusters(panel, clusters: dict, holdout=DEFAULT_HOLDOUT, min_weeks=DEFAULT_MIN_WEEKS,
                 include_precreation=True):
    """Fit VAR and baseline models for every cluster.

    Returns ``(fits, skipped)`` where ``fits[cid] = (var_fit, baseline_fit)``
    and ``skipped[cid]`` is the reason a cluster was not fitted.
    """
    fits, skipped = {}, {}
    for cid, members in clusters.items():
        spec = VarSpec(list(members), holdout, min_weeks, include_precreation)
        try:
            fits[cid] = (fit_var(panel, spec), fit_baseline(panel, spec))
        except (ValueError, SingularDesignError) as exc:
            skipped[cid] = str(exc)
            logger.warning("cluster %s skipped: %s", cid, exc)
    return fits, skipped


def save_fits(path, fits, skipped) -> None:
    doc = {
        "clusters": {str(cid): {"var": v.to_dict(), "baseline": b.to_dict()}
                     for cid, (v, b) in sorted(fits.items())},
        "skipped": {str(cid): reason for cid, reason in sorted(skipped.items())},
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")


def load_fits(path):
    with open(path) as fh:
        doc = json.load(fh)
    fits = {int(cid): (VarFit.from_dict(d["var"]), VarFit.from_dict(d["baseline"]))
            for cid, d in doc["clusters"].items()}
    return dict(sorted(fits.items())), {int(k): v for k, v in doc["skipped"].items()}
