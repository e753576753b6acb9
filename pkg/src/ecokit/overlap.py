"""User-overlap embedding and overlap density.

Groups are represented by max-normalized user-frequency columns, projected
onto the top ``k`` left singular vectors of the frequency matrix.  Overlap
between two groups is the cosine similarity of their projections and a
group's overlap density is its mean overlap with every other group, scaled so
the densest group has density 1.
"""
from __future__ import annotations

import csv
import logging
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from sklearn.utils.extmath import randomized_svd

logger = logging.getLogger(__name__)

DEFAULT_K = 600


@dataclass
class OverlapModel:
    groups: list[str]
    embedding: np.ndarray  # k x |S|
    similarities: np.ndarray  # |S| x |S|
    density: np.ndarray
    singular_values: np.ndarray

    @property
    def k(self) -> int:
        return self.embedding.shape[0]

    def save(self, directory) -> None:
        _write_matrix(f"{directory}/similarities.csv", self.groups, self.similarities)
        _write_matrix(f"{directory}/embedding.csv", self.groups, self.embedding.T,
                      header=[f"dim{i}" for i in range(self.k)])
        with open(f"{directory}/density.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["group", "density"])
            for g, d in zip(self.groups, self.density):
                w.writerow([g, repr(float(d))])
        with open(f"{directory}/singular_values.csv", "w", newline="") as fh:
            fh.write("index,value\n")
            for i, s in enumerate(self.singular_values):
                fh.write(f"{i},{float(s)!r}\n")

    @classmethod
    def load(cls, directory) -> OverlapModel:
        groups, sims = _read_matrix(f"{directory}/similarities.csv")
        _, emb = _read_matrix(f"{directory}/embedding.csv")
        dens = {}
        with open(f"{directory}/density.csv", newline="") as fh:
            for row in csv.DictReader(fh):
                dens[row["group"]] = float(row["density"])
        with open(f"{directory}/singular_values.csv", newline="") as fh:
            svals = np.array([float(r["value"]) for r in csv.DictReader(fh)])
        return cls(groups, emb.T.copy(), sims, np.array([dens[g] for g in groups]), svals)


def _write_matrix(path, groups, mat, header=None):
    header = header if header is not None else list(groups)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["group"] + list(header))
        for g, row in zip(groups, mat):
            w.writerow([g] + [repr(float(v)) for v in row])


def _read_matrix(path):
    groups, rows = [], []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        next(reader)
        for rec in reader:
            groups.append(rec[0])
            rows.append([float(v) for v in rec[1:]])
    return groups, np.array(rows)


def normalize_frequencies(counts) -> sp.csc_matrix:
    """Divide every column by its maximum so each column peaks at exactly 1."""
    F = sp.csc_matrix(counts, dtype=np.float64)
    colmax = F.max(axis=0).toarray().ravel()
    if np.any(colmax <= 0):
        bad = np.flatnonzero(colmax <= 0).tolist()
        raise ValueError(f"all-zero frequency columns: {bad}")
    return sp.csc_matrix(F @ sp.diags(1.0 / colmax))


def embed(F, k: int = DEFAULT_K, seed: int = 0, method: str = "randomized") -> tuple[np.ndarray, np.ndarray]:
    """Project columns of ``F`` on its top-``k`` left singular vectors.

    Returns ``(U_k.T @ F, singular_values)``.  ``method`` is ``"randomized"``
    (10 oversamples, 4 power iterations) or ``"exact"``; ``k`` equal to the
    smaller dimension always uses the exact dense SVD.
    """
    n_rows, n_cols = F.shape
    limit = min(n_rows, n_cols)
    if k < 1:
        raise ValueError("k must be >= 1")
    if k > limit:
        warnings.warn(f"k={k} exceeds min(F.shape)={limit}; using k={limit}", stacklevel=2)
        k = limit
    if method not in ("randomized", "exact"):
        raise ValueError(f"unknown SVD method {method!r}")
    if method == "exact" or k >= limit:
        dense = F.toarray() if sp.issparse(F) else np.asarray(F, dtype=float)
        U, S, _ = np.linalg.svd(dense, full_matrices=False)
        U, S = U[:, :k], S[:k]
    else:
        U, S, _ = randomized_svd(F, k, n_oversamples=10, n_iter=4, random_state=seed)
    _fix_signs(U)
    emb = np.asarray(U.T @ F if not sp.issparse(F) else (F.T @ U).T)
    rank = int(np.sum(S > S[0] * max(F.shape) * np.finfo(float).eps)) if S.size and S[0] > 0 else 0
    if rank < k:
        warnings.warn(f"k={k} exceeds numerical rank {rank}; trailing dimensions are near zero",
                      stacklevel=2)
    return emb, S


def _fix_signs(U):
    # largest-magnitude entry of each singular vector made positive
    idx = np.argmax(np.abs(U), axis=0)
    signs = np.sign(U[idx, np.arange(U.shape[1])])
    signs[signs == 0] = 1.0
    U *= signs


def overlap_matrix(embedding) -> np.ndarray:
    """Cosine similarity between embedded columns.

    Zero-norm columns get similarity 0 to everything, including themselves.
    """
    E = np.asarray(embedding, dtype=float)
    norms = np.linalg.norm(E, axis=0)
    zero = norms == 0
    if zero.any():
        warnings.warn(f"{int(zero.sum())} groups have zero-norm embeddings", stacklevel=2)
    unit = np.divide(E, norms, out=np.zeros_like(E), where=~zero)
    sims = unit.T @ unit
    sims = (sims + sims.T) / 2
    np.clip(sims, -1.0, 1.0, out=sims)
    diag = np.where(zero, 0.0, 1.0)
    np.fill_diagonal(sims, diag)
    return sims


def overlap_density(similarities) -> np.ndarray:
    """Mean off-diagonal overlap per group, divided by the largest such mean."""
    o = np.asarray(similarities, dtype=float)
    if o.ndim != 2 or o.shape[0] != o.shape[1]:
        raise ValueError("similarities must be square")
    n = o.shape[0]
    if n < 2:
        raise ValueError("overlap density needs at least 2 groups")
    raw = (o.sum(axis=1) - np.diag(o)) / (n - 1)
    top = raw.max()
    if top <= 0:
        raise ValueError("maximum raw overlap density is not positive")
    return raw / top


def build_overlap(ufm, k: int = DEFAULT_K, seed: int = 0, method: str = "randomized") -> OverlapModel:
    F = normalize_frequencies(ufm.counts)
    emb, S = embed(F, k, seed, method)
    sims = overlap_matrix(emb)
    return OverlapModel(list(ufm.groups), emb, sims, overlap_density(sims), S)
