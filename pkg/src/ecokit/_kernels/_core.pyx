# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot loops. Signatures mirror ``_fallback``."""
import numpy as np

cimport numpy as cnp
from libc.math cimport INFINITY
from libc.string cimport memset

cnp.import_array()

# rows per BLAS block in silhouette_samples; bounds memory at BLOCK * n doubles
DEF BLOCK = 256


def var_recursion(double[:, ::1] base, double[:, ::1] phi, double[:, ::1] y0,
                  double[:, :, ::1] shocks, const unsigned char[:, ::1] active=None,
                  double lower=-INFINITY):
    cdef Py_ssize_t R = shocks.shape[0]
    cdef Py_ssize_t n = shocks.shape[1]
    cdef Py_ssize_t M = shocks.shape[2]
    cdef Py_ssize_t r, t, i, j
    cdef double yj
    cdef bint masked = active is not None
    cdef bint clip = lower > -INFINITY
    out_arr = np.empty((R, n + 1, M), dtype=np.float64)
    cdef double[:, :, ::1] out = out_arr
    # phi transposed so the inner loop is an axpy over contiguous memory
    cdef double[:, ::1] phi_t = np.ascontiguousarray(np.asarray(phi).T)
    cdef double *prev
    cdef double *cur
    cdef double *row
    with nogil:
        for r in range(R):
            for i in range(M):
                out[r, 0, i] = y0[r, i]
            for t in range(n):
                prev = &out[r, t, 0]
                cur = &out[r, t + 1, 0]
                for i in range(M):
                    cur[i] = base[t, i] + shocks[r, t, i]
                for j in range(M):
                    yj = prev[j]
                    row = &phi_t[j, 0]
                    for i in range(M):
                        cur[i] += row[i] * yj
                if masked:
                    for i in range(M):
                        if not active[t, i]:
                            cur[i] = 0.0
                if clip:
                    for i in range(M):
                        if cur[i] < lower:
                            cur[i] = lower
    return out_arr


def silhouette_samples(double[:, ::1] X, cnp.intp_t[::1] labels, Py_ssize_t n_clusters):
    cdef Py_ssize_t n = X.shape[0]
    cdef Py_ssize_t i, j, c, b0, nb, bi
    cdef double a, b, m
    Xa = np.asarray(X)
    counts_arr = np.bincount(np.asarray(labels), minlength=n_clusters).astype(np.intp)
    out_arr = np.zeros(n, dtype=np.float64)
    sums_arr = np.empty((BLOCK, n_clusters), dtype=np.float64)
    cdef cnp.intp_t[::1] counts = counts_arr
    cdef double[::1] out = out_arr
    cdef double[:, ::1] sums = sums_arr
    cdef double[:, ::1] G
    for b0 in range(0, n, BLOCK):
        nb = min(BLOCK, n - b0)
        G = np.ascontiguousarray(Xa[b0:b0 + nb] @ Xa.T)
        with nogil:
            memset(&sums[0, 0], 0, BLOCK * n_clusters * sizeof(double))
            for bi in range(nb):
                for j in range(n):
                    sums[bi, labels[j]] += 1.0 - G[bi, j]
                i = b0 + bi
                c = labels[i]
                # drop the self term, whose distance is zero by definition
                sums[bi, c] -= 1.0 - G[bi, i]
                if counts[c] <= 1:
                    out[i] = 0.0
                    continue
                a = sums[bi, c] / (counts[c] - 1)
                b = INFINITY
                for j in range(n_clusters):
                    if j != c and counts[j] > 0:
                        m = sums[bi, j] / counts[j]
                        if m < b:
                            b = m
                m = a if a > b else b
                out[i] = (b - a) / m if m > 0 else 0.0
    return out_arr
