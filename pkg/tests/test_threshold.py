import numpy as np
import pytest

from cvstop import (BoundaryDerivativeError, ConfigError, Decision, DecisionModel, GridFunction, NoThresholdError,
                    ThresholdModel, decide, solve_cvi, solve_threshold_curve, threshold_gradient)
from cvstop.core import Grid, StateSpace
from cvstop.models import build_model
from cvstop.models.catalog import reservation_closed_form


def toy(exit_payoff, direction, lower=(-np.inf, 0.0), upper=(np.inf, 5.0), bracket=(-1.0, 1.0), grad=None):
    base = DecisionModel(beta=0.9, exit_payoff=exit_payoff, flow_payoff=lambda z: 0 * z[..., 1],
                         shock_sampler=lambda z, e: np.stack(np.broadcast_arrays(0 * e[..., 0], 1 + 0 * z[..., 1]),
                                                             axis=-1),
                         state_space=StateSpace(lower, upper, names=("x", "y")), exit_payoff_grad=grad)
    return ThresholdModel(base, threshold_dim=0, direction=direction, x_bracket=bracket)


Y = Grid((np.linspace(0.0, 5.0, 11),), dims=(1,))


def test_bisection_matches_inverse_increasing():
    # r = exp(x) + y, so xbar = log(psi - y); the bracket has to grow to reach it
    tm = toy(lambda z: np.exp(z[..., 0]) + z[..., 1], "increasing")
    y = Y.nodes[0]
    psi = GridFunction(Y, y + np.linspace(0.5, 40.0, y.size))
    curve = solve_threshold_curve(tm, psi, root_tol=1e-13)
    np.testing.assert_allclose(curve.values, np.log(psi.flat - y), atol=1e-12)
    assert curve.name == "x_bar" and curve.direction == "increasing"


def test_bisection_matches_inverse_decreasing():
    tm = toy(lambda z: z[..., 1] - 2 * z[..., 0], "decreasing")
    y = Y.nodes[0]
    psi = GridFunction(Y, np.cos(y))
    curve = solve_threshold_curve(tm, psi, root_tol=1e-13)
    np.testing.assert_allclose(curve.values, (y - np.cos(y)) / 2, atol=1e-12)


def test_curve_monotone_in_continuation_value():
    tm = toy(lambda z: np.exp(z[..., 0]) + z[..., 1], "increasing")
    base = Y.nodes[0] + 2.0
    lo = solve_threshold_curve(tm, GridFunction(Y, base)).values
    hi = solve_threshold_curve(tm, GridFunction(Y, base + 1e-9)).values
    assert np.all(hi >= lo)


def test_decide_ties_stop():
    tm = toy(lambda z: z[..., 0] + z[..., 1], "increasing")
    psi = GridFunction(Y, Y.nodes[0] + 0.25)
    curve = solve_threshold_curve(tm, psi)
    xbar = float(curve.values[3])
    y = Y.nodes[0][3]
    assert decide(tm, xbar, [y], curve) == Decision.STOP
    assert decide(tm, xbar - 1e-6, [y], curve) == Decision.CONTINUE
    out = decide(tm, np.array([xbar, xbar - 1.0]), np.array([[y], [y]]), curve)
    assert list(out) == ["stop", "continue"]
    dec = toy(lambda z: z[..., 1] - z[..., 0], "decreasing")
    cdec = solve_threshold_curve(dec, psi)
    assert decide(dec, cdec.values[3], [y], cdec) == Decision.STOP


def test_no_threshold_inside_closed_bounds():
    b = build_model("js_two_density")
    g = b.grid("cvi")
    with pytest.raises(NoThresholdError, match="pi"):
        solve_threshold_curve(b.threshold, GridFunction(g, np.full(g.shape, -1.0)))
    with pytest.raises(NoThresholdError):
        # reservation wage above the offer ceiling
        solve_threshold_curve(b.threshold, GridFunction(g, np.full(g.shape, 1e3)))


def test_curve_rejects_wrong_grid():
    b = build_model("js_two_density")
    g = b.grid("vfi")
    with pytest.raises(ConfigError):
        solve_threshold_curve(b.threshold, GridFunction(g, np.zeros(g.shape)))


def test_threshold_model_validation():
    with pytest.raises(ConfigError):
        toy(lambda z: z[..., 0], "sideways")
    with pytest.raises(ConfigError):
        toy(lambda z: z[..., 0], "increasing", bracket=(1.0, 1.0))


def test_structure_check_catches_dependence_on_threshold_coordinate():
    tm = toy(lambda z: z[..., 0], "increasing")
    states = np.array([[0.0, 1.0], [0.0, 2.0]])
    tm.check_structure(states, np.zeros((3, 1)))
    leaky = ThresholdModel(DecisionModel(beta=0.9, exit_payoff=lambda z: z[..., 0], flow_payoff=lambda z: 0 * z[..., 0],
                                         shock_sampler=lambda z, e: z + e[..., :1] * 0,
                                         state_space=StateSpace((-np.inf, 0), (np.inf, 5))),
                           0, "increasing", (-1.0, 1.0))
    with pytest.raises(ConfigError, match="transition"):
        leaky.check_structure(states, np.zeros((3, 1)))
    with pytest.raises(ConfigError, match="decreasing"):
        toy(lambda z: z[..., 0], "decreasing").check_structure(states, np.zeros((3, 1)))


@pytest.fixture(scope="module")
def two_density():
    b = build_model("js_two_density")
    psi, _ = solve_cvi(b.model, b.grid("cvi"), b.integrator, tol=1e-10)
    return b, psi, solve_threshold_curve(b.threshold, psi, root_tol=1e-13)


def test_two_density_curve_matches_closed_form(two_density):
    b, psi, curve = two_density
    np.testing.assert_allclose(curve.values, reservation_closed_form("js_two_density", psi.values), atol=1e-11)


def test_gradient_matches_finite_difference_of_curve(two_density):
    b, psi, curve = two_density
    nodes = psi.grid.nodes[0]
    for j in (1, 10, 25, 48):
        fd = (curve.values[j + 1] - curve.values[j - 1]) / (nodes[j + 1] - nodes[j - 1])
        assert threshold_gradient(b.threshold, psi, curve, (j,), 0) == pytest.approx(fd, rel=1e-9, abs=1e-12)


def test_gradient_without_analytic_payoff_derivative():
    r = lambda z: np.exp(z[..., 0]) + z[..., 1] ** 2
    tm = toy(r, "increasing")
    y = Y.nodes[0]
    psi = GridFunction(Y, y ** 2 + 3.0 + y)
    curve = solve_threshold_curve(tm, psi, root_tol=1e-13)
    # xbar = log(3 + y); the grid difference of the quadratic psi is exact, so the formula gives 1 / (3 + y)
    got = threshold_gradient(tm, psi, curve, (4,), 0)
    expected = 1.0 / (3.0 + y[4])
    assert got == pytest.approx(expected, rel=1e-6)


def test_gradient_at_boundary_raises(two_density):
    b, psi, curve = two_density
    with pytest.raises(BoundaryDerivativeError):
        threshold_gradient(b.threshold, psi, curve, (0,), 0)
    with pytest.raises(BoundaryDerivativeError):
        threshold_gradient(b.threshold, psi, curve, (psi.grid.shape[0] - 1,), 0)
    with pytest.raises(ConfigError):
        threshold_gradient(b.threshold, psi, curve, (3, 3), 0)
