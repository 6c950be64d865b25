import json

import numpy as np
import pytest

import hfsem


def test_simulate_and_quad_var():
    x = hfsem.simulate(2000, seed=3)
    assert x.shape == (2001, 10)
    q = hfsem.quad_var(x)
    assert q.shape == (10, 10)
    np.testing.assert_allclose(q, q.T)
    s0 = hfsem.sigma0()
    assert np.linalg.norm(q - s0) / np.linalg.norm(s0) < 0.2


def test_builtin_specs():
    m1, m2, m3 = (hfsem.builtin_spec(f"model{k}") for k in (1, 2, 3))
    assert (m1.q, m2.q, m3.q) == (22, 23, 21)
    assert m3.reference_theta is None
    again = hfsem.spec_from_json(m1.to_json())
    assert again.q == 22 and again.id == "model1"


def test_implied_cov_at_truth():
    m1 = hfsem.builtin_spec("model1")
    np.testing.assert_allclose(hfsem.implied_cov(m1, m1.reference_theta), hfsem.sigma0(), rtol=1e-12)
    assert np.linalg.matrix_rank(hfsem.jacobian_delta(m1, m1.reference_theta)) == 22


def test_gradient_matches_differences():
    m1 = hfsem.builtin_spec("model1")
    q = hfsem.quad_var(hfsem.simulate(500, seed=4))
    t = m1.reference_theta * 1.05
    g = hfsem.grad_h_n(m1, q, 500, t)
    h = 1e-5
    e = np.zeros_like(t)
    e[3] = h
    fd = (hfsem.h_n(m1, q, 500, t + e) - hfsem.h_n(m1, q, 500, t - e)) / (2 * h)
    assert abs(fd - g[3]) < 1e-5 * (1 + abs(g[3]))


def test_fit_and_select():
    n = 1000
    q = hfsem.quad_var(hfsem.simulate(n, seed=9))
    reports = []
    for k in (1, 2):
        spec = hfsem.builtin_spec(f"model{k}")
        reports.append(hfsem.fit(spec, q, n, init=spec.reference_theta, starts=1))
    reports.append(hfsem.fit(hfsem.builtin_spec("model3"), q, n, starts=2, seed=1))
    for r in reports:
        c = hfsem.criteria(r)
        assert c["qbic2"] == pytest.approx(-2 * r.h_at_hat + r.q * np.log(n))
        if r.j_flag:
            assert c["qbic1"] - c["qbic2"] == pytest.approx(c["logdet_gamma_tilde"], abs=1e-10)
    p = hfsem.posterior_probs(reports, "qbic2")
    assert sum(p) == pytest.approx(1.0)
    assert hfsem.select(reports, "qbic2") == 0
    assert json.loads(reports[0].to_json())["model_id"] == "model1"


def test_information_and_limit():
    m1 = hfsem.builtin_spec("model1")
    g = hfsem.gamma_zero(m1, m1.reference_theta, hfsem.sigma0())
    assert np.all(np.linalg.eigvalsh(g) > 0)
    theta_bar, h0 = hfsem.limit_optimum(m1, hfsem.sigma0())
    np.testing.assert_allclose(theta_bar, m1.reference_theta, atol=1e-5)


def test_run_experiment():
    config = {
        "schema": "hfsem-exp-v1",
        "n_values": [100],
        "replications": 2,
        "model_spec_paths": ["builtin:model1", "builtin:model3"],
        "identify_trials": 1,
        "threads": 1,
    }
    r = hfsem.run_experiment(json.dumps(config))
    assert r["invariant_violations"] == []
    assert r["model_ids"] == ["model1", "model3"]
    assert sum(r["counts"][0][0]) + r["failures"][0] == 2


def test_errors_are_value_errors():
    with pytest.raises(ValueError):
        hfsem.builtin_spec("model9")
    with pytest.raises(ValueError):
        hfsem.quad_var(np.zeros((1, 3)))
