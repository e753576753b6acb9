"""Quadratic density-dependence regression of growth on overlap density."""
from __future__ import annotations

import logging
from dataclasses import asdict, dataclass

import numpy as np
from scipy import stats

logger = logging.getLogger(__name__)

COLUMNS = ("const", "density", "density^2")


class SingularDesignError(np.linalg.LinAlgError):
    pass


@dataclass
class GrowthObservation:
    group: str
    growth: float
    density: float


@dataclass
class QuadraticFit:
    coefficients: np.ndarray  # B0, B1, B2
    covariance: np.ndarray
    n: int
    r_squared: float
    sigma2: float
    density_range: tuple[float, float]
    densities: np.ndarray  # observed, for percentiles

    @property
    def df_resid(self) -> int:
        return self.n - 3

    @property
    def vertex(self) -> float:
        b1, b2 = self.coefficients[1:]
        return float(-b1 / (2 * b2)) if b2 != 0 else float("nan")

    @property
    def std_errors(self) -> np.ndarray:
        return np.sqrt(np.clip(np.diag(self.covariance), 0, None))

    def conf_int(self, level: float = 0.95) -> np.ndarray:
        q = _tq(level, self.df_resid)
        se = self.std_errors
        return np.column_stack([self.coefficients - q * se, self.coefficients + q * se])

    def to_dict(self) -> dict:
        ci = self.conf_int()
        return {
            "coefficients": dict(zip(COLUMNS, map(float, self.coefficients))),
            "std_errors": dict(zip(COLUMNS, map(float, self.std_errors))),
            "conf_int_95": {c: [float(lo), float(hi)] for c, (lo, hi) in zip(COLUMNS, ci)},
            "covariance": self.covariance.tolist(),
            "n": self.n,
            "r_squared": self.r_squared,
            "vertex": self.vertex,
            "covariance_estimator": "ols-nonrobust",
        }


def _tq(level, df):
    return float(stats.t.ppf(0.5 + level / 2, max(df, 1)))


def compute_growth(panel, holdout_weeks: int = 24, density=None, smooth_weeks: int = 1
                   ) -> list[GrowthObservation]:
    """Change in log size over the last ``holdout_weeks`` weeks.

    With ``smooth_weeks > 1`` both endpoints are replaced by the mean of the
    trailing ``smooth_weeks`` weeks.  Groups created after the window start
    are dropped.  ``density`` maps group -> overlap density (0 if omitted).
    """
    T = panel.n_weeks
    if T <= holdout_weeks:
        raise ValueError(f"panel has {T} weeks, need more than {holdout_weeks}")
    start = T - 1 - holdout_weeks
    if start - smooth_weeks + 1 < 0:
        raise ValueError("smoothing window reaches before the first week")
    out, late = [], []
    for i, g in enumerate(panel.groups):
        if panel.creation_week[i] > start - smooth_weeks + 1:
            late.append(g)
            continue
        row = panel.sizes[i]
        y_end = row[T - smooth_weeks:].mean()
        y_start = row[start - smooth_weeks + 1: start + 1].mean()
        d = float(density[g]) if density is not None else 0.0
        out.append(GrowthObservation(g, float(y_end - y_start), d))
    if late:
        logger.warning("%d groups created inside the growth window were dropped", len(late))
    return out


def _design(d):
    d = np.asarray(d, dtype=float)
    return np.column_stack([np.ones_like(d), d, d * d])


def fit_model1(observations) -> QuadraticFit:
    """OLS of growth on ``[1, d, d^2]`` with nonrobust covariance."""
    d = np.array([o.density for o in observations], dtype=float)
    y = np.array([o.growth for o in observations], dtype=float)
    n = d.size
    if n < 3:
        raise ValueError("need at least 3 observations")
    X = _design(d)
    rank = np.linalg.matrix_rank(X)
    if rank < 3:
        raise SingularDesignError(
            f"design [const, density, density^2] has rank {rank}; "
            f"density takes {np.unique(d).size} distinct values")
    beta, *_ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - X @ beta
    rss = float(resid @ resid)
    sigma2 = rss / (n - 3) if n > 3 else 0.0
    cov = sigma2 * np.linalg.inv(X.T @ X)
    cov = (cov + cov.T) / 2
    tss = float(((y - y.mean()) ** 2).sum())
    r2 = 1 - rss / tss if tss > 0 else 1.0
    return QuadraticFit(beta, cov, n, r2, sigma2, (float(d.min()), float(d.max())), d)


def marginal_effects(fit: QuadraticFit, grid, level: float = 0.95) -> dict[str, np.ndarray]:
    """Predicted growth over ``grid`` with delta-method pointwise intervals."""
    grid = np.asarray(grid, dtype=float)
    G = _design(grid)
    yhat = G @ fit.coefficients
    se = np.sqrt(np.clip(np.einsum("ij,jk,ik->i", G, fit.covariance, G), 0, None))
    q = _tq(level, fit.df_resid)
    return {"density": grid, "effect": yhat, "se": se, "lower": yhat - q * se, "upper": yhat + q * se}


def shape_test(fit: QuadraticFit, level: float = 0.95) -> dict:
    """Classify the fitted curve as cap-shaped, u-shaped, monotone or flat.

    Curved verdicts need both slope terms significant with opposite signs and
    the vertex inside the observed density range.
    """
    ci = fit.conf_int(level)
    sig = (ci[:, 0] > 0) | (ci[:, 1] < 0)
    b1, b2 = fit.coefficients[1:]
    lo, hi = fit.density_range
    vertex = fit.vertex
    inside = np.isfinite(vertex) and lo <= vertex <= hi
    if sig[1] and sig[2] and inside and b1 > 0 > b2:
        verdict = "cap-shaped"
    elif sig[1] and sig[2] and inside and b1 < 0 < b2:
        verdict = "u-shaped"
    elif sig[1] or sig[2]:
        verdict = "monotone"
    else:
        verdict = "flat"
    pct = (float(stats.percentileofscore(fit.densities, vertex, kind="mean"))
           if np.isfinite(vertex) else float("nan"))
    return {"verdict": verdict, "vertex": vertex, "vertex_percentile": pct,
            "vertex_in_range": bool(inside), "significant": sig.tolist()}


def observations_to_rows(observations):
    return [asdict(o) for o in observations]
