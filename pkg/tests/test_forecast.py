import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_panel, simulate_var
from ecokit.forecast import (Forecast, actuals_for, compare, crps, crps_normal, forecast, rmse,
                             score_cluster)
from ecokit.var import VarFit, VarSpec, fit_baseline, fit_var


def hand_fit(phi, sigma, b0, b1=None, last=None, n=20):
    phi = np.asarray(phi, dtype=float)
    M = phi.shape[0]
    y = np.zeros((n, M))
    if last is not None:
        y[-1] = last
    z = np.zeros(M)
    return VarFit(
        members=[f"g{i}" for i in range(M)], kind="var", window_start=0,
        creation=np.zeros(M, dtype=int), y=y, phi=phi, intercept=np.asarray(b0, dtype=float),
        trend=z if b1 is None else np.asarray(b1, dtype=float), counter=z,
        sigma=np.asarray(sigma, dtype=float), phi_se=np.zeros((M, M)), intercept_se=z,
        trend_se=z, counter_se=z, residuals=np.zeros((n - 1, M)), n_params=np.full(M, M + 2))


def test_zero_phi_forecasts_intercept():
    sigma = np.array([[0.04, 0.01], [0.01, 0.09]])
    f = forecast(hand_fit(np.zeros((2, 2)), sigma, [1.5, -0.5], last=[9.0, 9.0]), 5)
    np.testing.assert_allclose(f.mean, np.tile([1.5, -0.5], (5, 1)))
    np.testing.assert_allclose(f.sd, np.tile([0.2, 0.3], (5, 1)))


def test_geometric_variance():
    f = forecast(hand_fit(0.5 * np.eye(2), np.eye(2), [0.0, 0.0]), 3)
    np.testing.assert_allclose(f.sd[1], np.sqrt(1.25))
    np.testing.assert_allclose(f.sd[2], np.sqrt(1 + 0.25 + 0.0625))


def test_mean_and_variance_match_monte_carlo():
    rng = np.random.default_rng(0)
    phi = np.array([[0.6, 0.2, 0.0], [-0.1, 0.5, 0.1], [0.05, 0.1, 0.7]])
    A = rng.normal(scale=0.3, size=(3, 3))
    sigma = A @ A.T + 0.05 * np.eye(3)
    fit = hand_fit(phi, sigma, [0.5, 1.0, -0.3], b1=[0.01, 0.0, -0.02], last=[2.0, 1.0, 0.5])
    H = 8
    f = forecast(fit, H)
    L = np.linalg.cholesky(sigma)
    n = 100_000
    paths = np.empty((H, n, 3))
    prev = np.tile(fit.y[-1], (n, 1))
    for h in range(H):
        t = fit.last_t + h + 1
        prev = fit.intercept + fit.trend * t + prev @ phi.T + rng.normal(size=(n, 3)) @ L.T
        paths[h] = prev
    for h in range(H):
        emp = np.cov(paths[h].T)
        np.testing.assert_allclose(f.covariance[h], emp, rtol=0.02, atol=0.02 * np.abs(emp).max())
        np.testing.assert_allclose(f.mean[h], paths[h].mean(axis=0), atol=0.02)


def test_variance_is_psd_monotone():
    rng = np.random.default_rng(1)
    phi = rng.normal(scale=0.3, size=(4, 4))
    A = rng.normal(size=(4, 4))
    f = forecast(hand_fit(phi, A @ A.T, np.zeros(4)), 12)
    for h in range(1, 12):
        assert np.linalg.eigvalsh(f.covariance[h] - f.covariance[h - 1]).min() >= -1e-10


def test_unstable_fit_is_flagged(caplog):
    f = forecast(hand_fit(1.2 * np.eye(2), np.eye(2), np.zeros(2)), 3)
    assert f.unstable
    assert "unstable" in caplog.text


def test_rmse_examples():
    y = np.arange(12.0).reshape(4, 3)
    assert rmse(y, y) == 0
    assert rmse(y + 0.5, y) == pytest.approx(0.5)
    rng = np.random.default_rng(2)
    a, b = rng.normal(size=(24, 5)), rng.normal(size=(24, 5))
    total = 0.0
    for h in range(24):
        for j in range(5):
            total += (a[h, j] - b[h, j]) ** 2
    assert rmse(a, b) == pytest.approx((total / 120) ** 0.5, abs=1e-12)
    per = np.mean([np.sqrt(np.mean((a[:, j] - b[:, j]) ** 2)) for j in range(5)])
    assert rmse(a, b, pooled=False) == pytest.approx(per, abs=1e-12)


def test_crps_closed_form():
    assert crps_normal(0.0, 0.0, 1.0) == pytest.approx(2 / np.sqrt(2 * np.pi) - 1 / np.sqrt(np.pi))
    assert crps_normal(0.0, 0.0, 1.0) == pytest.approx(0.2337, abs=1e-4)
    np.testing.assert_array_equal(crps_normal([1.0, -2.0], [0.5, 0.0], 0.0), [0.5, 2.0])
    assert crps_normal(1.0, 0.5, 1e-12) == pytest.approx(0.5, abs=1e-9)


def test_crps_against_sample_estimator():
    rng = np.random.default_rng(3)
    X = rng.normal(0.3, 1.5, 1_000_000)
    Xp = rng.normal(0.3, 1.5, 1_000_000)
    y = 1.1
    mc = np.mean(np.abs(X - y)) - 0.5 * np.mean(np.abs(X - Xp))
    assert crps_normal(y, 0.3, 1.5) == pytest.approx(mc, abs=5e-3)


def test_crps_batch_sum():
    from scipy.stats import norm

    rng = np.random.default_rng(4)
    mu, sd, y = rng.normal(size=(6, 4)), rng.uniform(0.1, 2, (6, 4)), rng.normal(size=(6, 4))
    f = Forecast([f"g{i}" for i in range(4)], "var", mu, sd, np.zeros((6, 4, 4)))
    total = 0.0
    for h in range(6):
        for j in range(4):
            z = (y[h, j] - mu[h, j]) / sd[h, j]
            total += sd[h, j] * (z * (2 * norm.cdf(z) - 1) + 2 * norm.pdf(z) - 1 / np.sqrt(np.pi))
    assert crps(f, y) == pytest.approx(total, abs=1e-9)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000))
def test_scores_permutation_invariant(seed):
    rng = np.random.default_rng(seed)
    mu, sd, y = rng.normal(size=(5, 3)), rng.uniform(0.1, 2, (5, 3)), rng.normal(size=(5, 3))
    perm = rng.permutation(15)
    f = Forecast(["a", "b", "c"], "var", mu, sd, np.zeros((5, 3, 3)))
    g = Forecast(["a", "b", "c"], "var", mu.ravel()[perm].reshape(5, 3),
                 sd.ravel()[perm].reshape(5, 3), np.zeros((5, 3, 3)))
    yp = y.ravel()[perm].reshape(5, 3)
    assert rmse(f, y) == pytest.approx(rmse(g, yp), rel=1e-12)
    assert crps(f, y) == pytest.approx(crps(g, yp), rel=1e-12)


def test_interval_half_width_is_one_sd():
    f = Forecast.from_interval(["a"], "var", [[1.0]], [[0.4]])
    assert f.sd[0, 0] == 0.4 and f.covariance[0, 0, 0] == pytest.approx(0.16)


def test_compare_examples():
    rep = compare({"rmse": 0.75, "crps": 72669}, {"rmse": 0.84, "crps": 72853})
    assert rep["rmse"]["winner"] == rep["crps"]["winner"] == "var"
    f = Forecast(["a"], "var", np.ones((3, 1)), np.ones((3, 1)), np.ones((3, 1, 1)))
    s = score_cluster(f, f, np.zeros((3, 1)))
    rep = compare({0: s})
    assert rep["rmse"]["winner"] == rep["crps"]["winner"] == "tie"
    with pytest.raises(ValueError):
        compare({})


def test_baseline_forecast_ignores_other_groups():
    y = simulate_var(np.array([[0.6, 0.2], [0.1, 0.5]]), [1.0, 1.0], 150, 0.1, 5)
    panel = make_panel(y)
    spec = VarSpec(panel.groups, holdout=24, min_weeks=1)
    a = forecast(fit_baseline(panel, spec), 24)
    y2 = y.copy()
    y2[:, 1] += np.random.default_rng(6).normal(size=150)
    b = forecast(fit_baseline(make_panel(y2), spec), 24)
    np.testing.assert_allclose(a.mean[:, 0], b.mean[:, 0], atol=1e-12)
    np.testing.assert_allclose(a.sd[:, 0], b.sd[:, 0], atol=1e-12)


def test_actuals_alignment_and_nested_fit():
    y = simulate_var(np.array([[0.6, 0.2], [0.1, 0.5]]), [1.0, 1.0], 150, 0.1, 7)
    panel = make_panel(y)
    spec = VarSpec(panel.groups, holdout=24, min_weeks=1)
    full, base = fit_var(panel, spec), fit_baseline(panel, spec)
    act = actuals_for(full, panel, 24)
    np.testing.assert_array_equal(act, y[126:])
    assert np.all(full.rss <= base.rss)
    with pytest.raises(ValueError):
        actuals_for(full, panel, 25)
