import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cvstop import ConfigError, EvaluationError, InputError
from cvstop.core import (DecisionModel, Grid, GridFunction, StateSpace, check_kernel_normalization,
                         corner_offsets, interpolate_stencil, make_grid, stencil)
from cvstop.models import build_model


def test_state_space_infinite_bounds_are_open():
    s = StateSpace((-np.inf, 0.0), (np.inf, 1.0), names=("a", "b"))
    assert s.open_flags == (True, False)
    assert s.dim == 2 and s.index("b") == 1
    assert list(s.contains(np.array([[0.0, 0.5], [0.0, 1.5]]))) == [True, False]


@pytest.mark.parametrize("lo, hi", [((0.0,), (0.0,)), ((1.0,), (0.0,)), ((np.nan,), (1.0,)), ((), ())])
def test_state_space_rejects_bad_bounds(lo, hi):
    with pytest.raises(ConfigError):
        StateSpace(lo, hi)


def test_state_space_rejects_duplicate_names():
    with pytest.raises(ConfigError):
        StateSpace((0, 0), (1, 1), names=("x", "x"))


def test_decision_model_checks_beta():
    space = StateSpace((0.0,), (1.0,))
    kw = dict(exit_payoff=lambda z: z[..., 0], flow_payoff=lambda z: z[..., 0],
              shock_sampler=lambda z, e: z, state_space=space)
    DecisionModel(beta=0.0, **kw)
    for beta in (1.0, -0.1, 1.5):
        with pytest.raises(ConfigError):
            DecisionModel(beta=beta, **kw)


def test_make_grid_uniform_and_log():
    space = StateSpace((0.0, 1e-4), (2.0, 10.0), names=("w", "theta"))
    g = make_grid(space, [5, 7], ["uniform", "log"])
    np.testing.assert_allclose(g.nodes[0], [0, 0.5, 1, 1.5, 2])
    th = g.nodes[1]
    assert th[0] == 1e-4 and th[-1] == 10.0
    # log spacing packs nodes toward the lower end
    assert np.all(np.diff(np.diff(th)) > 0)
    assert g.shape == (5, 7) and g.size == 35 and g.names == ("w", "theta")


def test_make_grid_errors():
    space = StateSpace((0.0,), (np.inf,))
    with pytest.raises(ConfigError):
        make_grid(space, [10])
    with pytest.raises(ConfigError):
        make_grid(StateSpace((0.0,), (1.0,)), [1])
    with pytest.raises(ConfigError):
        make_grid(StateSpace((0.0,), (1.0,)), [4], "cubic")


def test_grid_points_c_order_and_full_states():
    g = Grid(([0.0, 1.0], [10.0, 20.0, 30.0]), dims=(0, 2))
    pts = g.points()
    assert pts.shape == (6, 2)
    np.testing.assert_array_equal(pts[:3], [[0, 10], [0, 20], [0, 30]])
    full = g.full_states((5.0, 7.0, 9.0))
    np.testing.assert_array_equal(full[:, 1], 7.0)
    np.testing.assert_array_equal(full[:, [0, 2]], pts)


def test_grid_rejects_unsorted_nodes():
    with pytest.raises(ConfigError):
        Grid(([0.0, 2.0, 1.0],))


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(-3, 3), min_size=3, max_size=3),
       st.lists(st.tuples(st.floats(-1, 3), st.floats(0, 4.9)), min_size=1, max_size=20))
def test_interpolation_reproduces_affine_functions(coef, pts):
    g = Grid((np.linspace(-1, 3, 6), np.geomspace(0.1, 5, 5) - 0.1))
    x, y = np.meshgrid(*g.nodes, indexing="ij")
    f = GridFunction(g, coef[0] + coef[1] * x + coef[2] * y)
    p = np.array(pts)
    np.testing.assert_allclose(f(p), coef[0] + coef[1] * p[:, 0] + coef[2] * p[:, 1], atol=1e-10)


def test_interpolation_clamps_outside_grid():
    g = Grid((np.array([0.0, 1.0, 2.0]),))
    f = GridFunction(g, [1.0, 3.0, 4.0])
    assert f(-5.0) == 1.0 and f(9.0) == 4.0
    assert f(0.5) == pytest.approx(2.0)
    np.testing.assert_allclose(f(np.array([0.5, 1.5])), [2.0, 3.5])


def test_stencil_and_kernel_path_agree():
    g = Grid((np.linspace(0, 1, 4), np.linspace(0, 2, 5), np.linspace(-1, 1, 3)))
    rng = np.random.default_rng(0)
    vals = rng.normal(size=g.shape)
    pts = rng.uniform([-0.2, -0.2, -1.2], [1.2, 2.2, 1.2], size=(50, 3))
    base, frac = stencil(g, pts)
    out = interpolate_stencil(vals.ravel(), corner_offsets(g.shape), base, frac)
    np.testing.assert_allclose(out, GridFunction(g, vals)(pts))
    assert np.all((frac >= 0) & (frac <= 1))


def test_grid_function_rejects_nonfinite_and_is_readonly():
    g = Grid((np.array([0.0, 1.0]),))
    with pytest.raises(EvaluationError):
        GridFunction(g, [0.0, np.nan])
    f = GridFunction(g, [0.0, 1.0])
    with pytest.raises(ValueError):
        f.values[0] = 3.0


def test_grid_function_rejects_wrong_state_width():
    g = Grid((np.array([0.0, 1.0]), np.array([0.0, 1.0])))
    f = GridFunction(g, np.zeros((2, 2)))
    with pytest.raises(InputError):
        f(np.zeros((4, 3)))
    with pytest.raises(InputError):
        f(np.array([[np.nan, 0.0]]))


def test_kernel_normalization_uniform_offers():
    b = build_model("js_bounded")
    est, se = check_kernel_normalization(b.model, np.array([1.0]), StateSpace((0.0,), (2.0,)), seed=1)
    assert abs(est - 1.0) <= 3 * se + 1e-12


def test_kernel_normalization_ar1():
    b = build_model("js_markov_crra")
    est, se = check_kernel_normalization(b.model, np.array([0.5]), StateSpace((-8.0,), (8.0,)), seed=2)
    assert abs(est - 1.0) <= 4 * se
