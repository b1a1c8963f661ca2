"""Time-consistent benchmark: threshold, pasting, value function shape."""

import numpy as np
import pytest

from eqstop.benchmark import benchmark_value, solve_benchmark
from eqstop.model import AdmissibilityError, CostSpec, MarketModel, RunningCost

from oracles import XB_LINEAR, alpha_poly_root

M02 = MarketModel(b=0.0, sigma=0.2)
LINEAR = CostSpec(f=RunningCost.linear(), K=1.0)


@pytest.fixture(scope="module")
def sol():
    return solve_benchmark(M02, LINEAR, 0.05)


class TestThreshold:
    def test_linear_closed_form(self, sol):
        # x_B = alpha r K/(alpha-1), frozen from the 30-digit oracle
        assert sol.x_threshold == pytest.approx(XB_LINEAR, rel=1e-9)

    def test_closed_form_from_scratch(self, sol):
        a = alpha_poly_root(0.05, 0.0, 0.2)
        assert sol.x_threshold == pytest.approx(a * 0.05 * 1.0 / (a - 1.0), rel=1e-9)

    def test_smooth_pasting(self, sol):
        assert abs(sol.value_dx(sol.x_threshold)) < 1e-8

    def test_pasting_equation_root(self, sol):
        assert abs(sol.sp_residual(sol.x_threshold)) < 1e-9
        # strictly decreasing -> single sign change over a wide log grid
        ys = np.geomspace(sol.x_threshold / 100, sol.x_threshold * 100, 400)
        signs = np.sign([sol.sp_residual(y) for y in ys])
        assert np.count_nonzero(np.diff(signs) != 0) == 1

    def test_flat_cost_never_stops(self):
        with pytest.raises(AdmissibilityError):
            solve_benchmark(M02, CostSpec(f=RunningCost.const(0.0), K=1.0), 0.05)

    def test_drift_at_rate_inadmissible(self):
        with pytest.raises(AdmissibilityError):
            solve_benchmark(MarketModel(b=0.05, sigma=0.2), LINEAR, 0.05)


class TestValueFunction:
    def test_boundary_value(self, sol):
        assert benchmark_value(sol, sol.x_threshold) == pytest.approx(1.0, abs=1e-14)
        assert benchmark_value(sol, 2.0 * sol.x_threshold) == 1.0

    def test_zero_limit_linear_cost(self, sol):
        # alpha > 1 kills the power term and L(0+) = x/r -> 0 for f(x) = x
        assert benchmark_value(sol, 1e-10) == pytest.approx(0.0, abs=1e-8)

    def test_below_stop_cost_and_monotone(self, sol):
        xs = np.geomspace(0.01 * sol.x_threshold, 0.999 * sol.x_threshold, 200)
        vals = sol.value(xs)
        assert np.all(vals < 1.0)
        assert np.all(np.diff(sol.value(np.geomspace(0.01, 3.0, 100) * sol.x_threshold)) >= -1e-12)

    def test_matches_pasted_formula(self, sol):
        x = 0.5 * sol.x_threshold
        a = sol.alpha
        expected = (1.0 - sol.L_at_threshold) * 0.5**a + x / 0.05
        assert sol.value(x) == pytest.approx(expected, rel=1e-12)

    def test_power_cost_benchmark_solves(self):
        cost = CostSpec(f=RunningCost.power(0.5), K=1.0)
        s = solve_benchmark(M02, cost, 0.05)
        assert s.x_threshold > 0
        assert abs(s.sp_residual(s.x_threshold)) < 1e-9
        assert abs(s.value_dx(s.x_threshold)) < 1e-7
        xs = np.geomspace(0.05 * s.x_threshold, 0.99 * s.x_threshold, 50)
        assert np.all(s.value(xs) < 1.0 + 1e-12)
