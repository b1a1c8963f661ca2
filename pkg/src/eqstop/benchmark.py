"""Time-consistent exponential-discounting benchmark.

Classical perpetual stopping of a GBM with running cost f, terminal lump
sum K and a single discount rate r: the optimal rule is a threshold rule
whose boundary x_B is the unique root of the smooth-pasting equation

    alpha(r) (K - L(y; r)) + L_x(y; r) y = 0,

and the value function pastes a power-law homogeneous solution onto L below
the boundary.  Serves both as the sanity baseline and as the degenerate-
weighting reduction target for the time-inconsistent solver.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .discounting import Degenerate
from .model import CostSpec, MarketModel, admissibility, alpha_root, perpetual_cost
from .roots import solve_decreasing

__all__ = ["BenchmarkSolution", "solve_benchmark", "benchmark_value"]


@dataclass(frozen=True)
class BenchmarkSolution:
    """Threshold x_B, rate, and the pasted value function."""

    x_threshold: float
    r: float
    model: MarketModel
    cost: CostSpec
    alpha: float
    L_at_threshold: float

    @property
    def threshold(self) -> float:
        return self.x_threshold

    def sp_residual(self, y: float) -> float:
        """Smooth-pasting equation evaluated at y (zero at x_B)."""
        L, Lx, _ = perpetual_cost(float(y), self.r, self.model, self.cost)
        return self.alpha * (self.cost.K - L) + Lx * y

    def rate_weighted_value(self, x) -> float:
        """r * V_B(x): the discount coupling term at a point mass."""
        return self.r * float(self.value(x))

    # common verifier interface
    pasting_residual = sp_residual

    def value(self, x):
        """V_B(x): pasted below the threshold, exactly K at and above it."""
        x_arr = np.atleast_1d(np.asarray(x, dtype=float))
        out = np.full_like(x_arr, self.cost.K)
        below = x_arr < self.x_threshold
        coef = self.cost.K - self.L_at_threshold
        for i in np.nonzero(below)[0]:
            L, _, _ = perpetual_cost(float(x_arr[i]), self.r, self.model, self.cost)
            out[i] = coef * (x_arr[i] / self.x_threshold) ** self.alpha + L
        return float(out[0]) if np.ndim(x) == 0 else out

    def value_dx(self, x, side: str = "left"):
        x = float(x)
        if x >= self.x_threshold and not (side == "left" and x == self.x_threshold):
            return 0.0
        _, Lx, _ = perpetual_cost(x, self.r, self.model, self.cost)
        coef = self.cost.K - self.L_at_threshold
        return coef * self.alpha * (x / self.x_threshold) ** self.alpha / x + Lx

    def value_dxx(self, x, side: str = "left"):
        x = float(x)
        if x >= self.x_threshold and not (side == "left" and x == self.x_threshold):
            return 0.0
        _, _, Lxx = perpetual_cost(x, self.r, self.model, self.cost)
        coef = self.cost.K - self.L_at_threshold
        a = self.alpha
        return coef * a * (a - 1.0) * (x / self.x_threshold) ** a / (x * x) + Lxx


def solve_benchmark(model: MarketModel, cost: CostSpec, r: float) -> BenchmarkSolution:
    """Solve the classical problem at a single rate r.

    Admissibility for the point mass at r must pass (f(0) < rK, b < r,
    x f_x(x) -> inf); the root is then bracketed and bisected on the
    strictly decreasing pasting equation.
    """
    report = admissibility(model, Degenerate(r), cost)
    report.require()
    alpha = alpha_root(r, model)
    K, f = cost.K, cost.f

    def q(y: float) -> float:
        L, Lx, _ = perpetual_cost(float(y), r, model, cost)
        return alpha * (K - L) + Lx * y

    lo = K * r / (2.0 * f.fx0 + r) if np.isfinite(f.fx0) and f.fx0 > 0 else 1e-8 * K
    hi = 10.0 * K * alpha * r / (alpha - 1.0) if alpha > 1.0 else 10.0 * K
    x_b = solve_decreasing(q, lo, hi, diagnostic=f"(benchmark, r={r})")
    L_star, _, _ = perpetual_cost(x_b, r, model, cost)
    return BenchmarkSolution(x_threshold=x_b, r=r, model=model, cost=cost,
                             alpha=alpha, L_at_threshold=L_star)


def benchmark_value(sol: BenchmarkSolution, x):
    """V_B(x) for x > 0 (piecewise; exactly K for x >= x_B)."""
    return sol.value(x)
