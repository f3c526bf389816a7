import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cvstop import (BellmanOperator, ConfigError, DiagnosticUnavailable, GridFunction, IntegratorSpec,
                    JovanovicOperator, MultiChoiceOperator, RepeatedModel, SolveReport, apply_bellman,
                    apply_jovanovic, apply_multichoice, continuation_from_value, estimate_contraction_factor,
                    iterate_to_fixed_point, solve_cvi, solve_multichoice, solve_repeated, solve_vfi,
                    value_from_continuation)
from cvstop.core import Grid, StateSpace, make_grid
from cvstop.models import build_model, bull_jovanovic, constant_model

# reservation wage of the bounded model (beta 0.95, c0 0.6, uniform offers on [0, 2]) from the
# quadratic x = (1 - beta) c0 + beta (x^2 + W^2) / (2W), solved in 30-digit arithmetic
JS_BOUNDED_PSI = 31.0451153376305708


@pytest.fixture(scope="module")
def bounded():
    b = build_model("js_bounded")
    return b, b.grid("cvi")


def test_bounded_job_search_against_closed_form(bounded):
    b, grid = bounded
    errs = []
    for order in (100, 1000):
        psi, rep = solve_cvi(b.model, grid, IntegratorSpec("grid_quadrature", order=order), tol=1e-12)
        assert rep.converged
        np.testing.assert_allclose(psi.flat, psi.flat[0])
        errs.append(abs(psi.flat[0] - JS_BOUNDED_PSI))
    assert errs[0] < 2e-3
    assert errs[1] < 5e-5
    # trapezoid rule on a kinked integrand: second order in the spacing
    assert errs[0] / errs[1] > 30


def test_vfi_and_cvi_agree_on_bounded_model(bounded):
    b, grid = bounded
    psi, _ = solve_cvi(b.model, grid, b.integrator, tol=1e-11)
    v, _ = solve_vfi(b.model, grid, b.integrator, tol=1e-11)
    np.testing.assert_allclose(value_from_continuation(b.model, psi).flat, v.flat, atol=1e-8)
    np.testing.assert_allclose(continuation_from_value(b.model, v, b.integrator).flat, psi.flat, atol=1e-8)


def test_cvi_iterates_bounded_by_fixed_point_from_zero(bounded):
    b, grid = bounded
    op = JovanovicOperator(b.model, grid, b.integrator)
    psi = np.zeros(grid.size)
    prev = None
    for _ in range(20):
        psi = op.step(psi)
        if prev is not None:
            assert np.all(psi >= prev - 1e-12)
        prev = psi
    assert np.all(psi <= JS_BOUNDED_PSI + 2e-3)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.floats(0, 50))
def test_constant_shift_is_discounted(seed, a):
    b = build_model("js_bounded")
    grid = b.grid("cvi", {"w": type(b.axes["w"])(0.0, 2.0, 15)})
    op = JovanovicOperator(b.model, grid, IntegratorSpec("grid_quadrature", order=30))
    psi = np.random.default_rng(seed).normal(0, 40, grid.size)
    lhs, base = op.step(psi + a), op.step(psi)
    assert np.all(lhs <= base + b.model.beta * a + 1e-9)
    assert np.all(lhs >= base - 1e-9)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_bellman_monotone(seed):
    b = build_model("js_markov_crra")
    grid = b.grid("vfi", {"z": type(b.axes["z"])(-4.0, 4.0, 20)})
    op = BellmanOperator(b.model, grid, IntegratorSpec("gauss_hermite", order=7))
    rng = np.random.default_rng(seed)
    lo = rng.normal(0, 10, grid.size)
    hi = lo + rng.uniform(0, 5, grid.size)
    assert np.all(op.step(lo) <= op.step(hi))


def test_apply_helpers_match_operator_classes(bounded):
    b, grid = bounded
    psi = GridFunction(grid, np.linspace(0, 5, grid.size))
    np.testing.assert_array_equal(apply_jovanovic(b.model, psi, b.integrator).flat,
                                  JovanovicOperator(b.model, grid, b.integrator)(psi).flat)
    np.testing.assert_array_equal(apply_bellman(b.model, psi, b.integrator).flat,
                                  BellmanOperator(b.model, grid, b.integrator)(psi).flat)


def test_operator_rejects_foreign_grid(bounded):
    b, grid = bounded
    op = JovanovicOperator(b.model, grid, b.integrator)
    other = GridFunction(Grid((np.linspace(0, 2, 7),)), np.zeros(7))
    with pytest.raises(ConfigError):
        op(other)


def test_iteration_reports_non_convergence(bounded):
    b, grid = bounded
    psi, rep = solve_cvi(b.model, grid, b.integrator, tol=1e-12, max_iter=3)
    assert not rep.converged and rep.iterations == 3 and len(rep.errors) == 3
    d = rep.to_dict()
    assert "wall_time_s" not in d and d["method"] == "cvi"
    assert "wall_time_s" in rep.to_dict(include_timing=True)


@pytest.mark.parametrize("tol, max_iter", [(0.0, 10), (-1.0, 10), (1e-6, 0)])
def test_iteration_argument_checks(bounded, tol, max_iter):
    b, grid = bounded
    with pytest.raises(ConfigError):
        solve_cvi(b.model, grid, b.integrator, tol=tol, max_iter=max_iter)


def test_contraction_factor_estimate():
    rep = SolveReport(iterations=30, errors=list(0.9 ** np.arange(30)), converged=True, tol=1e-3)
    assert estimate_contraction_factor(rep) == pytest.approx(0.9)
    with pytest.raises(DiagnosticUnavailable):
        estimate_contraction_factor(SolveReport(iterations=8, errors=[1.0] * 8, converged=True, tol=1.0))


def test_weighted_error_trace(bounded):
    b, grid = bounded
    from cvstop import build_weight_function
    ell = build_weight_function(b.model, b.certificate)
    psi, rep = solve_cvi(b.model, grid, b.integrator, tol=1e-8, weight=ell)
    ratios = np.array(rep.weighted_errors[1:]) / np.array(rep.weighted_errors[:-1])
    assert np.all(ratios <= ell.modulus + 1e-9)


def test_iterate_tuple_state():
    grid = Grid((np.array([0.0, 1.0]),))
    half = lambda pair: tuple(GridFunction(grid, 0.5 * f.flat + 1) for f in pair)
    zero = GridFunction(grid, np.zeros(2))
    (a, b), rep = iterate_to_fixed_point(half, (zero, zero), tol=1e-12)
    np.testing.assert_allclose(a.flat, 2.0, atol=1e-11)
    assert rep.converged


# ---------------------------------------------------------------- repeated decisions

@pytest.mark.parametrize("alpha, r_star", [(0.0, 0.0), (0.5, 2 / 3), (1.0, 1.0)])
def test_repeated_constants(alpha, r_star):
    # psi = 1 + 0.5 * 2; r = 0.5 alpha * 2 + 0.5 (1 - alpha) r
    base = constant_model(0.0, 1.0, 0.5)
    rep = RepeatedModel(base, exit_flow=lambda z: np.zeros(z.shape[:-1]), alpha=alpha)
    grid = make_grid(base.state_space, [4])
    (psi, r), report = solve_repeated(rep, grid, IntegratorSpec("gauss_hermite", order=1), tol=1e-14)
    np.testing.assert_allclose(psi.flat, 2.0, atol=1e-12)
    np.testing.assert_allclose(r.flat, r_star, atol=1e-12)


def test_repeated_alpha_checked():
    with pytest.raises(ConfigError):
        RepeatedModel(constant_model(0.0, 1.0, 0.5), exit_flow=lambda z: z[..., 0], alpha=1.5)


# ---------------------------------------------------------------- several choices

@pytest.fixture(scope="module")
def three_choices():
    choices, beta, space = bull_jovanovic()
    grid = make_grid(StateSpace((0.2, 0.2), (5.0, 5.0)), [10, 10])
    return choices, beta, space, grid


def test_multichoice_zero_discount_returns_rewards(three_choices):
    choices, beta, space, grid = three_choices
    rng = np.random.default_rng(0)
    psis = tuple(GridFunction(grid, rng.normal(size=grid.shape)) for _ in choices)
    out = apply_multichoice(choices, 0.0, space, psis, IntegratorSpec("gauss_hermite", order=4))
    states = grid.full_states((1.0, 1.0))
    for o, ch in zip(out, choices):
        assert np.array_equal(o.flat, np.broadcast_to(ch.reward(states), (grid.size,)))


def test_multichoice_single_choice_is_perpetuity():
    # with one alternative paying 1 forever, psi = 1 / (1 - beta)
    choices, _, space = bull_jovanovic()
    const = type(choices[0])(lambda z: np.ones(z.shape[:-1]), choices[0].shock_sampler, choices[0].shock_laws)
    grid = make_grid(StateSpace((0.2, 0.2), (5.0, 5.0)), [3, 3])
    (psi,), rep = solve_multichoice([const], 0.9, space, grid, IntegratorSpec("gauss_hermite", order=3), tol=1e-12)
    np.testing.assert_allclose(psi.flat, 10.0, atol=1e-10)


def test_multichoice_solution_dominates_rewards(three_choices):
    choices, beta, space, grid = three_choices
    psis, rep = solve_multichoice(choices, beta, space, grid, IntegratorSpec("gauss_hermite", order=6), tol=1e-8)
    assert rep.converged
    states = grid.full_states((1.0, 1.0))
    # staying put (choice 1) keeps the match; its value is at least the one-period reward plus discounted best
    for p, ch in zip(psis, choices):
        assert np.all(p.flat >= np.broadcast_to(ch.reward(states), (grid.size,)) - 1e-12)


def test_multichoice_needs_choices(three_choices):
    _, beta, space, grid = three_choices
    with pytest.raises(ConfigError):
        MultiChoiceOperator([], beta, space, grid, IntegratorSpec("gauss_hermite"))
