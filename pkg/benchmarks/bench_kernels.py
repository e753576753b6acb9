"""Compare the compiled kernels with the numpy fallback.

Usage::

    python benchmarks/bench_kernels.py [--repeat 5]

Shapes mirror real workloads: the VAR recursion is run at bootstrap size
(replicates x weeks x members) and the silhouette on a unit-normalized
embedding of a few thousand groups.
"""
from __future__ import annotations

import argparse
import timeit

import numpy as np

from ecokit._kernels import _fallback

try:
    from ecokit._kernels import _core
except ImportError:  # extension not built
    _core = None


def _var_case(R, T, M, seed=0):
    rng = np.random.default_rng(seed)
    phi = np.full((M, M), 0.02)
    np.fill_diagonal(phi, 0.5)
    base = np.ascontiguousarray(np.full((T, M), 1.0))
    y0 = np.ascontiguousarray(np.zeros((R, M)))
    shocks = np.ascontiguousarray(rng.normal(0, 0.1, size=(R, T, M)))
    active = np.ascontiguousarray(np.ones((T, M), dtype=np.uint8))
    return (base, phi, y0, shocks, active, -np.inf)


def _sil_case(n, d, k, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, d))
    X /= np.linalg.norm(X, axis=1, keepdims=True)
    labels = np.ascontiguousarray(rng.integers(0, k, size=n), dtype=np.intp)
    return (np.ascontiguousarray(X), labels, k)


CASES = [
    ("var_recursion R=1000 T=260 M=10", "var_recursion", _var_case(1000, 260, 10)),
    ("var_recursion R=200 T=520 M=40", "var_recursion", _var_case(200, 520, 40)),
    ("silhouette n=2000 d=50 k=40", "silhouette_samples", _sil_case(2000, 50, 40)),
    ("silhouette n=5000 d=100 k=100", "silhouette_samples", _sil_case(5000, 100, 100)),
]


def _best(fn, args, repeat):
    return min(timeit.repeat(lambda: fn(*args), number=1, repeat=repeat))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    a = ap.parse_args(argv)
    print(f"{'case':34s} {'fallback s':>11s} {'cython s':>10s} {'speedup':>8s}")
    for name, func, args in CASES:
        t_py = _best(getattr(_fallback, func), args, a.repeat)
        if _core is None:
            print(f"{name:34s} {t_py:11.4f} {'n/a':>10s} {'n/a':>8s}")
            continue
        ref = getattr(_fallback, func)(*args)
        got = getattr(_core, func)(*args)
        if not np.allclose(ref, got, rtol=1e-10, atol=1e-12):
            raise SystemExit(f"{name}: backends disagree")
        t_c = _best(getattr(_core, func), args, a.repeat)
        print(f"{name:34s} {t_py:11.4f} {t_c:10.4f} {t_py / t_c:7.1f}x")


if __name__ == "__main__":
    main()
