"""Hot kernels with a compiled core and a numpy fallback.

The compiled extension ``_core`` is used when it was built; otherwise, or
when ``ECOKIT_PURE_PYTHON`` is set, the functions in ``_fallback`` are used.
``BACKEND`` names the implementation that was selected.
"""
import os

import numpy as np

from . import _fallback

BACKEND = "python"
_impl = _fallback

if not os.environ.get("ECOKIT_PURE_PYTHON"):
    try:
        from . import _core as _impl  # noqa: F811
        BACKEND = "cython"
    except ImportError:
        _impl = _fallback


def var_recursion(base, phi, y0, shocks, active=None, lower=-np.inf):
    base = np.ascontiguousarray(base, dtype=np.float64)
    phi = np.ascontiguousarray(phi, dtype=np.float64)
    y0 = np.ascontiguousarray(np.atleast_2d(y0), dtype=np.float64)
    shocks = np.ascontiguousarray(shocks, dtype=np.float64)
    if shocks.ndim != 3 or shocks.shape[1:] != base.shape:
        raise ValueError("shocks must have shape (R,) + base.shape")
    if active is not None:
        active = np.ascontiguousarray(active, dtype=np.uint8)
    return _impl.var_recursion(base, phi, y0, shocks, active, float(lower))


def silhouette_samples(X, labels, n_clusters=None):
    X = np.ascontiguousarray(X, dtype=np.float64)
    labels = np.ascontiguousarray(labels, dtype=np.intp)
    if n_clusters is None:
        n_clusters = int(labels.max()) + 1
    return _impl.silhouette_samples(X, labels, int(n_clusters))


__all__ = ["BACKEND", "var_recursion", "silhouette_samples"]
