import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cvstop import (CertificateError, DriftCertificate, IntegratorSpec, build_weight_function, solve_cvi,
                    verify_drift, weighted_sup_norm)
from cvstop.models import build_model, constant_model
from cvstop.weights import choose_modulus_constants, continuation_bound, iterated_drift_bound, simulate_paths

one = lambda z: np.ones(np.shape(z)[:-1])


@pytest.mark.parametrize("kw", [dict(n=-1), dict(n=1.5), dict(m=0.0), dict(m=np.inf), dict(d=-1.0),
                                dict(payoff_scale=(1, 0, 1)), dict(payoff_scale=(1, -1, 1, 0))])
def test_certificate_validation(kw):
    args = dict(g=one, n=0, m=1.0, d=0.0)
    args.update(kw)
    with pytest.raises(CertificateError):
        DriftCertificate(**args)


def test_normalized_folds_constants():
    g = lambda z: np.abs(z[..., 0])
    cert = DriftCertificate(g, n=1, m=0.8, d=0.5, payoff_scale=(2.0, 1.0, 3.0, 0.5))
    norm = cert.normalized()
    z = np.array([[-2.0], [0.0], [4.0]])
    # A = max(a1, a3) = 3, B = max(a2, a4) = 1
    np.testing.assert_allclose(norm.g(z), 3 * np.abs(z[:, 0]) + 1)
    assert norm.d == pytest.approx(3 * 0.5 + 1 * 0.2)
    assert norm.payoff_scale == (1.0, 0.0, 1.0, 0.0) and (norm.m, norm.n) == (0.8, 1)
    unit = DriftCertificate(g, n=1, m=0.8, d=0.5)
    assert unit.normalized() is unit


@settings(max_examples=200, deadline=None)
@given(st.floats(0.01, 0.999), st.floats(0.01, 5.0), st.floats(0, 100))
def test_modulus_constants_admissible(beta, m, d):
    cert = DriftCertificate(one, n=0, m=m, d=d)
    if beta * m >= 1:
        with pytest.raises(CertificateError):
            choose_modulus_constants(cert, beta)
        return
    mp, dp = choose_modulus_constants(cert, beta)
    k = m + 2 * mp
    assert mp > 0 and k > 1 and beta * k < 1
    assert dp >= 1 and dp >= d / (k - 1) * (1 - 1e-12)


@settings(max_examples=100, deadline=None)
@given(st.floats(0.0, 50), st.floats(0.05, 2.0), st.floats(0, 10), st.integers(0, 12))
def test_iterated_bound_matches_recursion(g, m, d, t):
    b = g
    for _ in range(t):
        b = m * b + d
    assert iterated_drift_bound(g, m, d, t) == pytest.approx(b, rel=1e-9, abs=1e-9)


def test_iterated_bound_unit_factor():
    assert iterated_drift_bound(2.0, 1.0, 0.5, 4) == 4.0


def test_simulated_paths_shapes_and_weights():
    b = build_model("js_two_density")
    paths, w = simulate_paths(b.model, b.test_states, 3, 200, seed=4)
    assert len(paths) == 4 and paths[2].shape == (len(b.test_states), 200, 2)
    np.testing.assert_allclose(w.sum(axis=1), 1.0)
    np.testing.assert_array_equal(paths[0][:, 0, :], b.test_states)


def test_ar1_exponential_drift_exact():
    # g = exp(k z) for z' = rho z + b + sigma e has E g(z') = exp(k^2 sigma^2 / 2 + k b) g(z)^rho
    b = build_model("js_markov_crra", {"delta": 2.0})
    rho, sig = b.params["rho"], b.params["sigma"]
    k = -1.0
    z = np.array([[0.3]])
    paths, w = simulate_paths(b.model, z, 1, 200_000, seed=9)
    est = np.sum(w[0] * np.exp(k * paths[1][0, :, 0]))
    assert est == pytest.approx(np.exp(k * rho * 0.3 + k ** 2 * sig ** 2 / 2), rel=5e-3)


def test_equality_bound_passes_and_false_drift_fails():
    model = constant_model(1.0, 0.5, 0.9)
    states = np.array([[0.2], [0.8]])
    ok = verify_drift(model, DriftCertificate(one, n=0, m=1.0, d=0.0), states, draws=100, seed=0)
    assert ok.passed and len(ok.checks) == 2 * (2 + 5)
    bad = verify_drift(model, DriftCertificate(one, n=0, m=0.5, d=0.0), states, draws=100, seed=0)
    assert not bad.passed
    assert {c["check"] for c in bad.violations} == {"drift", "iterated_drift"}
    d = json.loads(bad.to_json())
    assert d["passed"] is False and d["seed"] == 0 and d["certificate"]["m"] == 0.5


def test_payoff_bound_violation_detected():
    model = constant_model(3.0, 0.5, 0.9)
    rep = verify_drift(model, DriftCertificate(one, n=0, m=1.0, d=0.0), [[0.5]], draws=50, seed=1)
    assert [c["check"] for c in rep.violations] == ["payoff_exit"]


def test_verify_drift_checks_state_width():
    from cvstop import ConfigError
    with pytest.raises(ConfigError):
        verify_drift(constant_model(1, 1, 0.5), DriftCertificate(one, n=0, m=1.0, d=0.0), [[0.1, 0.2]])


def test_weight_function_floor_and_determinism():
    b = build_model("js_learning_normal")
    ell = build_weight_function(b.model, b.certificate)
    vals = ell(b.test_states)
    assert np.all(vals >= ell.d_prime) and ell.d_prime >= 1
    np.testing.assert_array_equal(vals, ell(b.test_states))
    assert ell.modulus < 1
    assert isinstance(ell(b.test_states[0]), float)


def test_weighted_norm_of_solution_is_finite():
    b = build_model("js_bounded")
    psi, _ = solve_cvi(b.model, b.grid("cvi"), b.integrator, tol=1e-8)
    ell = build_weight_function(b.model, b.certificate, IntegratorSpec("monte_carlo", draws=10, seed=1))
    assert ell.draws == 10 and ell.seed == 1
    assert 0 < weighted_sup_norm(psi, ell) < np.inf


def test_continuation_bound_dominates_solution():
    b = build_model("js_bounded")
    psi, _ = solve_cvi(b.model, b.grid("cvi"), b.integrator, tol=1e-10)
    states = b.grid("cvi").full_states(b.model.anchor)
    assert np.all(np.abs(psi.flat) <= continuation_bound(b.model, b.certificate, states))


def test_continuation_bound_constant_model():
    # n = 0, g = r = 1, m = 1, d = 0: 2 / (1 - beta)
    model = constant_model(1.0, 0.0, 0.5)
    bound = continuation_bound(model, DriftCertificate(one, n=0, m=1.0, d=0.0), [[0.3]])
    assert bound == pytest.approx([4.0])
