import json
import math

import numpy as np
import pytest

import heavytail as ht


def test_psi_and_calibration():
    assert ht.psi(5.0, 2.0) == 2.0
    assert ht.psi(-0.5, 2.0) == -0.5
    with pytest.raises(ValueError):
        ht.psi(1.0, 0.0)
    tau, residual, saturated = ht.calibrate_tau([2.0] * 10, 4.0)
    assert not saturated
    assert tau == pytest.approx(2.0 * math.sqrt(10 / 4.0), rel=1e-9)
    assert residual <= 1e-6 * 4.0


def test_psi_matrix():
    out = ht.psi_matrix(np.array([[0.5, 10.0]]), np.array([[1.0, 2.0]]))
    np.testing.assert_array_equal(out, [[0.5, 2.0]])


def test_svt_diagonal():
    np.testing.assert_allclose(ht.svt(np.diag([3.0, 1.0]), 2.0), np.diag([1.0, 0.0]), atol=1e-14)


def test_solve_mc_full_observation():
    rng = np.random.default_rng(0)
    theta = rng.normal(size=(5, 5)) / 5
    rows, cols = np.meshgrid(range(5), range(5), indexing="ij")
    cfg = ht.McConfig(5, 5, max_norm_budget=100.0)
    est, converged, _ = ht.solve_mc(
        rows.ravel().tolist(), cols.ravel().tolist(), (5 * theta).ravel().tolist(),
        cfg, math.inf, 0.0)
    assert converged
    assert np.linalg.norm(est - theta) <= 1e-6


def test_schedule_scaling():
    cfg = ht.McConfig(20, 20, alpha=1.5)
    t1, l1 = ht.schedule(cfg, 1000)
    t2, l2 = ht.schedule(cfg, 2000)
    assert t2 / t1 == pytest.approx(2 ** (1 / 1.5), rel=1e-12)
    assert l2 / l1 == pytest.approx(2 ** (-0.5 / 1.5), rel=1e-12)


def test_clime_identity():
    np.testing.assert_allclose(ht.clime(np.eye(3), 0.3), 0.7 * np.eye(3), atol=1e-12)


def test_vicm_pipeline_and_distance():
    rng = np.random.default_rng(1)
    n, d1, d2 = 4000, 6, 2
    theta = np.zeros((d1, d2))
    theta[0, 0] = theta[1, 1] = 1.0
    x = rng.normal(size=(n, d1))
    z = rng.normal(size=(n, d2))
    y = (z * (x @ theta)).sum(axis=1) + 0.1 * rng.normal(size=n)
    est = ht.estimate_vicm(y, x, z, score="gaussian", clime_gamma=0.02, lambda_=0.1)
    assert est.shape == (d1, d2)
    assert ht.direction_distance(est, theta) < 0.3
    assert ht.direction_distance(-2 * theta, theta) == pytest.approx(0.0, abs=1e-15)
    g1, g2, r1, r2 = ht.calibrate_levels(y, x, z)
    assert g1.shape == (d1, d2) and g2.shape == (d2, d2)
    assert (g1 > 0).all() and (g2 > 0).all()


def test_degenerate_data_raises():
    y = np.ones(3)
    x = np.ones((3, 1))
    z = np.column_stack([np.ones(3), np.zeros(3)])
    with pytest.raises(ht.DegenerateDataError):
        ht.calibrate_levels(y, x, z)


def test_slope_fit():
    n = [1000, 2000, 4000, 8000]
    b0, b1, r2 = ht.fit_loglog_slope(n, [v ** -0.5 for v in n])
    assert b1 == pytest.approx(-0.5, abs=1e-12)
    assert r2 == pytest.approx(1.0)


def test_experiments_from_json():
    cfg = {"seed": 2, "d1": 8, "d2": 8, "rank": 2, "target_vectors": 20,
           "n_grid": [400, 800, 1600], "replicates": 1,
           "noises": [{"nu": 2.0, "scale": 0.2}]}
    out = ht.run_mc_experiment(json.dumps(cfg))
    assert len(out["records"]) == 6
    assert {r["estimator"] for r in out["records"]} == {"robust", "standard"}
    assert "slopes" in out["summary"]
    again = ht.run_mc_experiment(json.dumps(cfg))
    assert again["records"] == out["records"]

    vicm = ht.run_vicm_experiment(json.dumps({"d1": 10, "d2": 3, "s": 2,
                                              "n_grid": [500], "replicates": 1}))
    assert len(vicm["records"]) == 2


def test_bad_config_raises():
    with pytest.raises(ht.ConfigError):
        ht.run_vicm_experiment(json.dumps({"d1": 10, "unknown": 1}))
