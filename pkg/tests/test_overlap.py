import warnings

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from ecokit.ingest import CorpusConfig, ingest
from ecokit.overlap import (OverlapModel, build_overlap, embed, normalize_frequencies,
                            overlap_density, overlap_matrix)


def random_sparse(n_rows, n_cols, density, seed):
    rng = np.random.default_rng(seed)
    M = sp.random(n_rows, n_cols, density=density, random_state=rng,
                  data_rvs=lambda k: rng.integers(1, 20, k)).tocsc()
    # every column needs at least one user
    for j in range(n_cols):
        if M[:, j].nnz == 0:
            M[rng.integers(n_rows), j] = 1
    return M


def naive_cosine(A):
    n = A.shape[1]
    out = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            out[i, j] = A[:, i] @ A[:, j] / (np.linalg.norm(A[:, i]) * np.linalg.norm(A[:, j]))
    return out


def test_normalize_examples():
    F = normalize_frequencies(np.array([[4, 7], [2, 0], [0, 0]]))
    np.testing.assert_array_equal(F.toarray(), [[1, 1], [0.5, 0], [0, 0]])


def test_normalize_rejects_empty_column():
    with pytest.raises(ValueError, match="all-zero"):
        normalize_frequencies(np.array([[1, 0], [2, 0]]))


def test_mini_corpus_column_maxima(mini_corpus):
    _, ufm, _ = ingest(mini_corpus, "csv", CorpusConfig())
    F = normalize_frequencies(ufm.counts).toarray()
    assert all(max(F[:, j]) == 1.0 for j in range(F.shape[1]))


def test_identity_embedding_preserves_inner_products():
    emb, _ = embed(np.eye(2), k=2)
    np.testing.assert_allclose(emb.T @ emb, np.eye(2), atol=1e-15)


def test_disjoint_users_have_zero_overlap():
    F = normalize_frequencies(np.array([[3, 0], [1, 0], [0, 2], [0, 5]]))
    emb, _ = embed(F, k=2)
    assert abs(overlap_matrix(emb)[0, 1]) < 1e-12


@pytest.mark.parametrize("method", ["randomized", "exact"])
def test_reconstruction_error_matches_dense_svd(method):
    F = normalize_frequencies(random_sparse(200, 20, 0.1, 1))
    k = 10
    emb, S = embed(F, k, seed=0, method=method)
    dense = F.toarray()
    _, s_all, _ = np.linalg.svd(dense, full_matrices=False)
    # ||F||^2 - ||U_k' F||^2 is the squared residual of the rank-k projection
    err = np.sqrt(max(np.sum(dense ** 2) - np.sum(emb ** 2), 0))
    oracle = np.sqrt(np.sum(s_all[k:] ** 2))
    assert abs(err - oracle) <= 1e-6 * oracle
    np.testing.assert_allclose(S, s_all[:k], rtol=1e-6)


def test_randomized_matches_exact_on_low_rank_data():
    rng = np.random.default_rng(2)
    F = np.abs(rng.normal(size=(500, 8))) @ np.abs(rng.normal(size=(8, 60)))
    a, _ = embed(F, 8, method="randomized")
    b, _ = embed(F, 8, method="exact")
    np.testing.assert_allclose(overlap_matrix(a), overlap_matrix(b), atol=1e-8)


def test_k_clamped_and_rank_warning():
    with pytest.warns(UserWarning, match="exceeds min"):
        emb, _ = embed(np.eye(3), k=5)
    assert emb.shape == (3, 3)
    with pytest.warns(UserWarning, match="numerical rank"):
        embed(np.ones((4, 3)), k=3)


def test_overlap_matrix_examples():
    E = np.array([[1.0, 2.0, 0.0], [0.0, 0.0, 3.0]])
    o = overlap_matrix(E)
    assert o[0, 1] == pytest.approx(1.0)
    assert o[0, 2] == 0.0


def test_overlap_matrix_against_loop():
    E = np.random.default_rng(3).normal(size=(7, 5))
    np.testing.assert_allclose(overlap_matrix(E), naive_cosine(E), atol=1e-12)


def test_zero_norm_column_warns():
    with pytest.warns(UserWarning, match="zero-norm"):
        o = overlap_matrix(np.array([[1.0, 0.0], [1.0, 0.0]]))
    np.testing.assert_array_equal(o, [[1, 0], [0, 0]])


def test_density_examples():
    np.testing.assert_allclose(overlap_density(np.full((3, 3), 0.5) + 0.5 * np.eye(3)), [1, 1, 1])
    o = np.array([[1, 0.8, 0.0], [0.8, 1, 0.4], [0.0, 0.4, 1]])
    np.testing.assert_allclose(overlap_density(o), [2 / 3, 1, 1 / 3], atol=1e-15)


def test_density_against_double_loop():
    E = np.abs(np.random.default_rng(4).normal(size=(10, 50)))
    o = overlap_matrix(E)
    raw = [sum(o[i, j] for j in range(50) if j != i) / 49 for i in range(50)]
    np.testing.assert_allclose(overlap_density(o), np.array(raw) / max(raw), atol=1e-12)


def test_density_needs_two_groups():
    with pytest.raises(ValueError):
        overlap_density(np.ones((1, 1)))


def test_full_rank_embedding_equals_raw_cosine():
    F = normalize_frequencies(random_sparse(200, 20, 0.1, 5))
    emb, _ = embed(F, 20)
    np.testing.assert_allclose(overlap_matrix(emb), naive_cosine(F.toarray()), atol=1e-10)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 7), st.floats(0.01, 1000), st.integers(0, 10_000))
def test_scale_invariance(col, factor, seed):
    counts = random_sparse(40, 8, 0.3, seed).toarray().astype(float)
    scaled = counts.copy()
    scaled[:, col] *= factor
    a, _ = embed(normalize_frequencies(counts), 8)
    b, _ = embed(normalize_frequencies(scaled), 8)
    np.testing.assert_allclose(overlap_matrix(a), overlap_matrix(b), atol=1e-9)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.integers(2, 6))
def test_overlap_invariants(seed, k):
    F = normalize_frequencies(random_sparse(60, 12, 0.2, seed))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        emb, _ = embed(F, k, seed=seed)
    o = overlap_matrix(emb)
    np.testing.assert_allclose(o, o.T, atol=1e-9)
    assert np.all(np.abs(o) <= 1)
    nonzero = np.linalg.norm(emb, axis=0) > 0
    np.testing.assert_array_equal(np.diag(o)[nonzero], 1.0)
    d = overlap_density(o)
    assert np.all(np.isfinite(d)) and d.max() == 1.0


def test_model_round_trip(mini_corpus, tmp_path):
    _, ufm, _ = ingest(mini_corpus, "csv", CorpusConfig())
    m = build_overlap(ufm, k=5)
    m.save(tmp_path)
    back = OverlapModel.load(tmp_path)
    assert back.groups == m.groups
    np.testing.assert_array_equal(back.similarities, m.similarities)
    np.testing.assert_array_equal(back.embedding, m.embedding)
    np.testing.assert_array_equal(back.density, m.density)
