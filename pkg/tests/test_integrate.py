import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cvstop import ConfigError, EvaluationError, IntegratorSpec, expectation, expectation_stderr
from cvstop.core import DecisionModel, Grid, GridFunction, StateSpace
from cvstop.integrate import TransitionPlan, build_shock_set, gauss_hermite_nodes
from cvstop.models import build_model

SQRT_PI = np.sqrt(np.pi)


def ar1(rho=0.9, b=0.1, sigma=0.5):
    return DecisionModel(beta=0.9, exit_payoff=lambda z: z[..., 0], flow_payoff=lambda z: 0 * z[..., 0],
                         shock_sampler=lambda z, e: rho * z + b + sigma * e,
                         state_space=StateSpace((-np.inf,), (np.inf,)), shock_laws=("normal",))


def test_gh_order_one_and_two():
    x, w = gauss_hermite_nodes(1)
    np.testing.assert_allclose(x, [0.0], atol=1e-15)
    np.testing.assert_allclose(w, [SQRT_PI])
    x, w = gauss_hermite_nodes(2)
    np.testing.assert_allclose(np.sort(x), [-1 / np.sqrt(2), 1 / np.sqrt(2)])
    np.testing.assert_allclose(w, [SQRT_PI / 2] * 2)


@pytest.mark.parametrize("order", [1, 5, 40, 128])
def test_gh_weights_sum(order):
    assert abs(gauss_hermite_nodes(order)[1].sum() - SQRT_PI) <= 1e-12


@pytest.mark.parametrize("order", [0, 129, -3])
def test_gh_order_out_of_range(order):
    with pytest.raises(ConfigError):
        gauss_hermite_nodes(order)


def test_gh_second_moment_order_two():
    m = DecisionModel(beta=0.5, exit_payoff=lambda z: z[..., 0], flow_payoff=lambda z: z[..., 0],
                      shock_sampler=lambda z, e: e + 0 * z, state_space=StateSpace((-np.inf,), (np.inf,)),
                      shock_laws=("normal",))
    val = expectation(m, np.array([0.0]), lambda zn: zn[..., 0] ** 2, IntegratorSpec("gauss_hermite", order=2))
    assert val == pytest.approx(1.0, abs=1e-14)


@pytest.mark.parametrize("spec", [IntegratorSpec("gauss_hermite", order=1), IntegratorSpec("gauss_hermite", order=7),
                                  IntegratorSpec("monte_carlo", draws=50, seed=3),
                                  IntegratorSpec("grid_quadrature", order=9)])
def test_expectation_of_one(spec):
    assert expectation(ar1(), np.array([1.3]), lambda zn: np.ones(zn.shape[:-1]), spec) == pytest.approx(1.0)


@settings(max_examples=40, deadline=None)
@given(st.floats(-0.99, 0.99), st.floats(-2, 2), st.floats(0.01, 3), st.floats(-10, 10), st.integers(1, 30))
def test_gh_ar1_mean_exact(rho, b, sigma, z, order):
    val = expectation(ar1(rho, b, sigma), np.array([z]), lambda zn: zn[..., 0],
                      IntegratorSpec("gauss_hermite", order=order))
    assert val == pytest.approx(rho * z + b, abs=1e-11 * (1 + abs(z)))


@pytest.mark.parametrize("delta", [2.0, 3.5])
def test_gh_lognormal_moment(delta):
    rho, b, sigma, z = 0.9, 0.1, 0.5, 0.7
    k = 1 - delta
    exact = np.exp(k * (rho * z + b) + k ** 2 * sigma ** 2 / 2)
    val = expectation(ar1(rho, b, sigma), np.array([z]), lambda zn: np.exp(k * zn[..., 0]),
                      IntegratorSpec("gauss_hermite", order=20))
    assert abs(val / exact - 1) <= 1e-10


def test_gh_needs_normal_shocks():
    b = build_model("js_bounded")
    with pytest.raises(ConfigError):
        expectation(b.model, np.array([1.0]), lambda zn: zn[..., 0], IntegratorSpec("gauss_hermite", order=3))


def test_monte_carlo_needs_seed():
    with pytest.raises(ConfigError):
        expectation(ar1(), np.array([0.0]), lambda zn: zn[..., 0], IntegratorSpec("monte_carlo", draws=10))


def test_monte_carlo_deterministic():
    spec = IntegratorSpec("monte_carlo", draws=500, seed=11)
    f = lambda zn: np.sin(zn[..., 0])
    a = expectation(ar1(), np.array([[0.2], [1.0]]), f, spec)
    b = expectation(ar1(), np.array([[0.2], [1.0]]), f, IntegratorSpec("monte_carlo", draws=500, seed=11))
    assert np.array_equal(a, b)


def test_monte_carlo_stderr_slope():
    draws = np.array([100, 1000, 10_000])
    f = lambda zn: np.exp(0.5 * zn[..., 0])
    ses = [expectation_stderr(ar1(), np.array([0.3]), f, IntegratorSpec("monte_carlo", draws=int(n), seed=5))[1]
           for n in draws]
    slope = np.polyfit(np.log(draws), np.log(ses), 1)[0]
    assert abs(slope + 0.5) <= 0.1


def test_stderr_only_for_monte_carlo():
    with pytest.raises(ConfigError):
        expectation_stderr(ar1(), np.array([0.0]), lambda zn: zn[..., 0], IntegratorSpec("gauss_hermite"))


def test_uniform_trapezoid_exact_for_linear():
    b = build_model("js_bounded")
    val = expectation(b.model, np.array([1.0]), lambda zn: 3 * zn[..., 0] + 1, IntegratorSpec("grid_quadrature",
                                                                                             order=7))
    assert val == pytest.approx(3 * 1.0 + 1, abs=1e-13)


def test_normal_midpoint_rule_is_symmetric():
    pts = build_shock_set(IntegratorSpec("grid_quadrature", order=10), ("normal",)).points[:, 0]
    np.testing.assert_allclose(np.sort(pts), -np.sort(pts)[::-1], atol=1e-14)


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_nonfinite_integrand_reports_draw():
    with pytest.raises(EvaluationError, match="draw"):
        expectation(ar1(), np.array([0.0]), lambda zn: np.log(zn[..., 0]), IntegratorSpec("gauss_hermite", order=4))


def test_shock_weight_self_normalized():
    b = build_model("js_two_density")
    # E[w'] under the predictive mixture; Beta(1,1) mean 1 and Beta(3,1.2) mean 2*3/4.2
    pi = 0.3
    exact = pi * 1.0 + (1 - pi) * 2 * 3 / 4.2
    val = expectation(b.model, np.array([1.0, pi]), lambda zn: zn[..., 0],
                      IntegratorSpec("grid_quadrature", order=2000))
    # the Beta(3, 1.2) density has an unbounded derivative at the top, so the trapezoid error is about h^1.2
    assert val == pytest.approx(exact, abs=3e-4)


def test_transition_plan_matches_direct_interpolation():
    model = ar1()
    g = Grid((np.linspace(-3, 3, 25),))
    rng = np.random.default_rng(0)
    vals = rng.normal(size=25)
    spec = IntegratorSpec("monte_carlo", draws=64, seed=2)
    states = g.full_states((0.0,))
    plan = TransitionPlan(model, states, g, spec, with_reward=True)
    f = GridFunction(g, vals)
    direct = expectation(model, states, lambda zn: f(zn), spec)
    np.testing.assert_allclose(plan.expect(vals), direct, rtol=1e-13, atol=1e-13)
    direct_max = expectation(model, states, lambda zn: np.maximum(zn[..., 0], f(zn)), spec)
    np.testing.assert_allclose(plan.expect_max(vals), direct_max, rtol=1e-13, atol=1e-13)
    par = TransitionPlan(model, states, g, spec, with_reward=True, parallel=True)
    assert np.array_equal(par.expect_max(vals), plan.expect_max(vals))


def test_transition_plan_chunking_is_invisible():
    b = build_model("js_two_density")
    g = b.grid("vfi", {"w": type(b.axes["w"])(0.0, 2.0, 12), "pi": type(b.axes["pi"])(1e-4, 1 - 1e-4, 7)})
    states = g.full_states(b.model.anchor)
    spec = IntegratorSpec("grid_quadrature", order=30)
    vals = np.random.default_rng(1).normal(size=g.size)
    a = TransitionPlan(b.model, states, g, spec).expect(vals)
    c = TransitionPlan(b.model, states, g, spec, chunk=61).expect(vals)
    assert np.array_equal(a, c)


def test_plan_without_reward_refuses_max():
    g = Grid((np.linspace(-1, 1, 3),))
    plan = TransitionPlan(ar1(), g.full_states((0.0,)), g, IntegratorSpec("gauss_hermite", order=3))
    with pytest.raises(ConfigError):
        plan.expect_max(np.zeros(3))
    with pytest.raises(ConfigError):
        plan.expect(np.zeros(4))


def test_integrator_spec_validation():
    with pytest.raises(ConfigError):
        IntegratorSpec("simpson")
    with pytest.raises(ConfigError):
        IntegratorSpec(draws=0)
    assert IntegratorSpec("monte_carlo", draws=10, seed=4).to_dict() == {"kind": "monte_carlo", "draws": 10,
                                                                         "order": 10, "seed": 4}
