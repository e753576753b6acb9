"""Pure-Python (numpy) implementations of the compiled kernels."""
import numpy as np


def var_recursion(base, phi, y0, shocks, active=None, lower=-np.inf):
    """Run ``y[t+1] = base[t] + phi @ y[t] + shocks[:, t]`` for a batch of paths.

    Parameters
    ----------
    base : ndarray, shape (n, M)
        Deterministic part of each step (intercept, trend, exogenous terms).
    phi : ndarray, shape (M, M)
        Lag coefficients; ``phi[i, j]`` is the effect of series ``j`` on ``i``.
    y0 : ndarray, shape (R, M)
        Starting values, one row per path.
    shocks : ndarray, shape (R, n, M)
    active : ndarray of uint8, shape (n, M), optional
        Cells where ``active`` is zero are forced to 0.
    lower : float
        Values are clipped from below at ``lower``.

    Returns
    -------
    ndarray, shape (R, n + 1, M)
        Paths including the starting row.
    """
    R, n, M = shocks.shape
    out = np.empty((R, n + 1, M))
    out[:, 0] = y0
    phi_t = phi.T
    for t in range(n):
        y = base[t] + out[:, t] @ phi_t + shocks[:, t]
        if active is not None:
            y = np.where(active[t].astype(bool), y, 0.0)
        if lower > -np.inf:
            y = np.maximum(y, lower)
        out[:, t + 1] = y
    return out


def silhouette_samples(X, labels, n_clusters):
    """Per-point silhouette under distance ``1 - x_i . x_j`` for unit rows."""
    n = X.shape[0]
    D = 1.0 - X @ X.T
    np.fill_diagonal(D, 0.0)
    onehot = np.zeros((n, n_clusters))
    onehot[np.arange(n), labels] = 1.0
    counts = onehot.sum(axis=0)
    sums = D @ onehot
    own = counts[labels]
    with np.errstate(divide="ignore", invalid="ignore"):
        a = sums[np.arange(n), labels] / (own - 1)
        means = sums / counts
    means[np.arange(n), labels] = np.inf
    means[:, counts == 0] = np.inf
    b = means.min(axis=1)
    denom = np.maximum(a, b)
    with np.errstate(divide="ignore", invalid="ignore"):
        s = np.where(denom > 0, (b - a) / denom, 0.0)
    s[own <= 1] = 0.0
    return s
