import math

import numpy as np
import pytest

from nddeosc.delay_kernel import (
    CompositeDelay, CumulativeIntegral, c_prime, integrate, moving_sup, slow_variation_score, solve_c,
    tail_estimate, tail_grid, tail_inf, tail_sup,
)
from nddeosc.errors import BracketError, DegenerateError, MaxDepthError, NonFiniteError
from nddeosc.expr import parse
from nddeosc.model import AnalysisConfig

EX1_TAU = "0.5*cos(t) + 1 + exp(-t + 1 + 0.5*cos(t))"


def kernel(tau, delta, D, tol=1e-12):
    return CompositeDelay.build(parse(tau), parse(delta), D, tol)


def test_explicit_composite_delay_of_variable_example():
    cd = kernel(EX1_TAU, "exp(-t)", 6.0)
    t = np.linspace(10, 100, 20001)
    c = solve_c(cd, t)
    np.testing.assert_allclose(c, 0.5 * np.cos(t) + 1, rtol=0, atol=1e-10)


def test_zero_delta_gives_tau():
    cd = kernel("cos(t) + 2", "0", 3.0)
    t = np.linspace(5, 30, 101)
    np.testing.assert_allclose(solve_c(cd, t, explicit=False), np.cos(t) + 2, atol=1e-12)


def test_constant_delta_gives_difference():
    cd = kernel("cos(t) + 2", "0.5", 3.0)
    t = np.linspace(5, 30, 101)
    np.testing.assert_allclose(solve_c(cd, t, explicit=False), np.cos(t) + 1.5, atol=1e-12)
    np.testing.assert_allclose(solve_c(cd, t), np.cos(t) + 1.5, atol=1e-15)


def test_scalar_query_returns_float():
    cd = kernel("2", "0.5", 2.0)
    assert isinstance(solve_c(cd, 10.0), float)
    assert solve_c(cd, 10.0) == 1.5


def test_bracket_failure_when_tau_exceeds_bound():
    cd = kernel("t", "0", 2.0)
    with pytest.raises(BracketError):
        solve_c(cd, 5.0, explicit=False)


def test_c_prime_constant_delays_vanish():
    cd = kernel("2", "0.5", 2.0)
    assert c_prime(cd, 4.0, solve_c(cd, 4.0)) == 0.0


def test_c_prime_zero_delta_is_tau_prime():
    cd = kernel("0.3*sin(t) + 1", "0", 2.0)
    t = np.linspace(3, 9, 13)
    np.testing.assert_allclose(c_prime(cd, t, solve_c(cd, t)), 0.3 * np.cos(t), atol=1e-14)


def test_c_prime_of_variable_example_against_finite_differences():
    cd = kernel(EX1_TAU, "exp(-t)", 6.0)
    h = 1e-5
    for t in np.linspace(10, 30, 41):
        fd = (solve_c(cd, t + h, explicit=False) - solve_c(cd, t - h, explicit=False)) / (2 * h)
        exact = c_prime(cd, t, solve_c(cd, t))
        assert abs(exact - fd) < 1e-5
        assert exact == pytest.approx(-0.5 * math.sin(t), abs=1e-6)


def test_c_prime_degenerate():
    cd = CompositeDelay(parse("1"), parse("0.5*t"), parse("0"), parse("1"), 2.0)
    with pytest.raises(DegenerateError):
        c_prime(cd, 3.0, 1.0)


@pytest.mark.parametrize("f, a, b, exact", [
    (np.sin, 0.0, math.pi, 2.0),
    (lambda s: 0.2 * np.exp(-s), 7.0 - math.log(2), 7.0, 0.2 * math.exp(-7.0)),
    (lambda s: np.sin(s) + 1.5, 3.0, 5.0, 3 + 2 * math.sin(1) * math.sin(4.0)),
    (lambda s: 1 / np.sqrt(s), 1e-6, 1.0, 2 - 2e-3),
])
def test_integrate_closed_forms(f, a, b, exact):
    assert integrate(f, a, b, tol=1e-10) == pytest.approx(exact, abs=1e-10)


def test_integrate_empty_and_reversed():
    assert integrate(np.sin, 2.0, 2.0) == 0.0
    assert integrate(np.sin, math.pi, 0.0) == pytest.approx(-2.0, abs=1e-12)


def test_integrate_scalar_only_callable():
    assert integrate(lambda s: math.cos(s), 0.0, 1.0) == pytest.approx(math.sin(1.0), abs=1e-12)


def test_integrate_errors():
    with pytest.raises(NonFiniteError), np.errstate(divide="ignore"):
        integrate(lambda s: 1 / s, -1.0, 1.0)
    with pytest.raises(MaxDepthError):
        integrate(lambda s: np.sign(s - 1 / 3), 0.0, 1.0, tol=1e-300, max_depth=5)


def test_cumulative_windows_match_closed_form():
    table = CumulativeIntegral(lambda s: np.sin(s) + 1.5, 0.0, 60.0, 0.05, tol=1e-10)
    t = np.linspace(2.0, 60.0, 997)
    expected = 3 + 2 * math.sin(1) * np.sin(t - 1)
    np.testing.assert_allclose(table.window(t - 2, t), expected, atol=1e-12)
    assert table.window(5.0, 5.0) == 0.0
    with pytest.raises(ValueError):
        table(70.0)


def test_cumulative_agrees_with_adaptive_route():
    f = lambda s: np.exp(-0.1 * s) * np.cos(3 * s)
    table = CumulativeIntegral(f, 0.0, 20.0, 0.1)
    for lo, hi in [(0.0, 20.0), (1.234, 5.678), (10.05, 10.06)]:
        assert table.window(lo, hi) == pytest.approx(integrate(f, lo, hi, tol=1e-13), abs=1e-12)


def test_moving_sup_cases():
    assert moving_sup(lambda s: np.ones_like(s), 3.0, 2.0, 0.1) == 1.0
    D = 2.0
    assert moving_sup(lambda s: np.exp(-s), 10.0, D, 0.01) == pytest.approx(math.exp(-(10.0 - D)), rel=1e-12)
    step = 0.01
    got = moving_sup(np.sin, 7.0, 2 * math.pi, step)
    assert 1 - step ** 2 / 2 <= got <= 1.0
    values = moving_sup(np.sin, np.array([7.0, 8.0]), 2 * math.pi, step)
    assert values.shape == (2,)


CFG = AnalysisConfig(tail_start=math.exp(3), horizon=math.exp(7), grid_step=0.01)


def test_tail_of_constant():
    est = tail_inf(lambda t: np.full_like(t, 0.5), CFG)
    assert est.value == 0.5 and est.converged


def test_tail_inf_of_oscillating_coefficient():
    est = tail_inf(lambda t: 0.75 * np.sin(4 * t) + 1, CFG)
    assert est.value == pytest.approx(0.25, abs=1e-3)
    assert est.converged


def test_tail_sup_of_slowly_varying_coefficient():
    f = lambda t: 2 * np.cos(np.log(t)) + 2.05
    est = tail_sup(f, CFG)
    assert est.value == pytest.approx(4.05, abs=1e-6)
    short = tail_sup(f, CFG.with_(horizon=300.0))
    assert short.value < 4.0
    assert not short.converged


def test_tail_inf_bounds_every_sample():
    f = lambda t: np.sin(t) * np.exp(-t / 500)
    grid = tail_grid(CFG)
    est = tail_inf(f, CFG)
    assert np.all(est.value <= f(grid))


def test_tail_estimate_rejects_nan():
    grid = np.linspace(0, 1, 5)
    with pytest.raises(NonFiniteError):
        tail_estimate(np.array([0, 1, np.nan, 2, 3.0]), grid, AnalysisConfig(0, 1), "inf")


def test_slow_variation_scores():
    cfg = AnalysisConfig(tail_start=1e5, horizon=2e6, grid_step=10.0, slow_shifts=(1.0, 10.0))
    assert slow_variation_score(lambda t: np.full_like(t, 3.0), cfg) == 0.0
    f = lambda t: 2 * np.cos(np.log(t)) + 2.05
    assert slow_variation_score(f, cfg) <= 2 * 10 / 1e6 + 1e-9
    cfg_sin = AnalysisConfig(tail_start=10, horizon=200, grid_step=0.01, slow_shifts=(math.pi,))
    assert slow_variation_score(np.sin, cfg_sin) == pytest.approx(2.0, abs=1e-3)
