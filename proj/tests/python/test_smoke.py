import math
import os

import numpy as np
import pytest

import dgvi

DATA_DIR = os.environ.get("DGVI_DATA_DIR", os.path.join(os.path.dirname(__file__), "..", "..", "data"))


def test_fusion_matches_information_sum():
    rng = np.random.default_rng(0)
    beliefs, weights = [], [0.2, 0.5, 0.3]
    for _ in weights:
        a = rng.normal(size=(3, 3))
        beliefs.append(dgvi.GaussianBelief(rng.normal(size=3), a @ a.T + 3 * np.eye(3)))
    fused = dgvi.geometric_fuse(beliefs, weights)
    info = sum(w * b.information for w, b in zip(weights, beliefs))
    eta = sum(w * b.information @ b.mean for w, b in zip(weights, beliefs))
    np.testing.assert_allclose(fused.information, info, atol=1e-12)
    np.testing.assert_allclose(fused.mean, np.linalg.solve(info, eta), atol=1e-10)


def test_woodbury_against_numpy():
    rng = np.random.default_rng(1)
    a = rng.normal(size=(5, 5))
    sigma = np.linalg.inv(a @ a.T + np.eye(5))
    phi = rng.normal(size=5)
    out = dgvi.rank1_inverse_update(sigma, phi, 0.7)
    ref = np.linalg.inv(np.linalg.inv(sigma) + 0.7 * np.outer(phi, phi))
    np.testing.assert_allclose(out, ref, atol=1e-10)


def test_weights():
    w = dgvi.metropolis_weights([(0, 1), (1, 2), (2, 3), (3, 0)], 4)
    np.testing.assert_allclose(w.sum(axis=0), 1.0, atol=1e-15)
    np.testing.assert_allclose(w.sum(axis=1), 1.0, atol=1e-15)
    s = dgvi.sinkhorn_normalize(np.array([[2.0, 1.0], [1.0, 5.0]]))
    np.testing.assert_allclose(s.sum(axis=0), 1.0, atol=1e-10)
    assert dgvi.is_strongly_connected(s)
    with pytest.raises(dgvi.ValidationError):
        dgvi.metropolis_weights([(0, 1)], 3)


def test_probit_closed_form_and_quadrature():
    cf = dgvi.probit_closed_forms(0.3, 2.0)
    q = dgvi.quadrature_probit_moments(0.3, 2.0)
    assert abs(cf[0] - q[0]) < 1e-9 and abs(cf[1] - q[1]) < 1e-9
    assert dgvi.probit_closed_forms(0.0, 1.0)[0] == pytest.approx(0.5)


def test_classify_step_and_errors():
    b = dgvi.GaussianBelief.isotropic(3, 1.0)
    phi = np.array([1.0, 0.5, -0.2])
    out = dgvi.dgvi_classify_step([b, b], [0.5, 0.5], phi, 1)
    assert out.mean @ phi > 0
    assert np.all(np.linalg.eigvalsh(out.information) > 0)
    d = dgvi.DiagGaussianBelief.isotropic(3, 1.0)
    out_d = dgvi.diag_dgvi_classify_step([d], [1.0], phi, 0)
    assert out_d.mean @ phi < 0
    with pytest.raises(dgvi.ValidationError):
        dgvi.dgvi_classify_step([b], [1.0], phi, 2)
    with pytest.raises(ValueError):
        dgvi.geometric_fuse([b, b], [0.7, 0.7])


def test_unit_circle_particle_vs_conjugate():
    priors = [dgvi.GaussianBelief(np.array([math.cos(k * math.pi / 2), math.sin(k * math.pi / 2)]),
                                  np.eye(2)) for k in range(4)]
    w = [0.25] * 4
    z = np.array([1.0, 1.0])
    conj = dgvi.conjugate_fusion_posterior(priors, w, np.eye(2), np.eye(2), z)
    fitted, ess, particles = dgvi.particle_fusion_posterior(priors, w, np.eye(2), np.eye(2), z, 20000, 3)
    np.testing.assert_allclose(conj.mean, [0.5, 0.5], atol=1e-12)
    assert np.linalg.norm(fitted.mean - conj.mean) < 0.1
    assert particles.shape == (20000, 2) and ess > 1000


def test_run_experiment_dict(tmp_path):
    config = {
        "graph": {"n": 2, "edges": [[0, 1]]},
        "representation": "diagonal",
        "kernel": {"n_random": 10, "lengthscale": 0.3},
        "data": {"source": "csv", "path": os.path.join(DATA_DIR, "banana.csv"),
                 "split": {"train": 0.5, "test": 0.3, "verify": 0.2}, "replay": {"free_ratio": None}},
        "run": {"n_rounds": 200, "eval_every": 100},
    }
    a = dgvi.run_experiment(config, seed=1, out_dir=tmp_path)
    b = dgvi.run_experiment(config, seed=1)
    assert len(a["test"]) == 2 and 0.0 <= a["test"][0]["accuracy"] <= 1.0
    assert [m["verif_bce"] for m in a["metrics"]] == [m["verif_bce"] for m in b["metrics"]]
    assert (tmp_path / "metrics.csv").exists()
    with pytest.raises(dgvi.ValidationError, match="not found"):
        dgvi.run_experiment(str(tmp_path / "missing.json"))


def test_verify_suite():
    results = dgvi.verify("woodbury", 2)
    assert results and all(r["passed"] for r in results)
