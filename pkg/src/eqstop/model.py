"""Geometric Brownian motion primitives for perpetual stopping analysis.

Provides the market model dX = b X dt + sigma X dW, the positive
characteristic root alpha(r) of (1/2)sigma^2 a^2 + (b - sigma^2/2) a - r = 0,
the perpetual discounted running-cost value

    L(x; r) = E[ integral_0^inf e^{-r s} f(X_s) ds | X_0 = x ]

with first and second state derivatives, admissibility checks for a given
rate-weighting distribution, and the reduction of a smooth terminal cost to
a constant lump sum by absorbing its generator action into the running cost.

L has closed forms for the constant/linear/affine/power cost families; the
generic quadrature route (lognormal inner expectation by Gauss-Hermite,
adaptive outer time integral on geometric panels) is always available and is
used as the independent cross-check against those closed forms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

from .discounting import (
    DivergentMomentError,
    WeightingDistribution,
    inverse_rate,
    inverse_rate_shifted,
    mean_rate,
)

__all__ = [
    "MarketModel",
    "RunningCost",
    "CostSpec",
    "AdmissibilityCheck",
    "AdmissibilityReport",
    "AdmissibilityError",
    "DivergenceError",
    "AccuracyError",
    "alpha_root",
    "alpha_minus_one",
    "perpetual_cost",
    "admissibility",
    "reduce_terminal_cost",
]


class DivergenceError(ValueError):
    """The perpetual cost integral diverges for the requested rate."""


class AccuracyError(RuntimeError):
    """The quadrature tail bound could not be brought below tolerance."""


class AdmissibilityError(ValueError):
    """A mandatory admissibility check failed; solvers refuse to run."""


@dataclass(frozen=True)
class MarketModel:
    """GBM coefficients: drift b (1/time) and volatility sigma (1/sqrt(time))."""

    b: float
    sigma: float

    def __post_init__(self):
        if self.sigma <= 0:
            raise ValueError("volatility must be strictly positive")

    @property
    def sigma2(self) -> float:
        return self.sigma * self.sigma


def alpha_root(r, model: MarketModel):
    """Positive root of (1/2)sigma^2 a^2 + (b - sigma^2/2) a - r = 0.

    Vectorized over r.  alpha(r) > 1 whenever r > b, alpha is strictly
    increasing in r, and alpha(b) = 1 (taking the formula at r = b).
    """
    r_arr = np.asarray(r, dtype=float)
    if np.any(r_arr <= 0):
        raise ValueError("alpha_root requires r > 0")
    s2 = model.sigma2
    a_half = 0.5 * s2 - model.b  # -(b - sigma^2/2)
    root = np.sqrt(a_half * a_half + 2.0 * s2 * r_arr)
    out = (a_half + root) / s2
    return float(out) if np.isscalar(r) or r_arr.ndim == 0 else out


def alpha_minus_one(r, model: MarketModel):
    """alpha(r) - 1 in a cancellation-free form, = 2(r-b)/(sqrt(...) + B).

    Rationalized so that (alpha(r)-1)/(r-b) stays accurate for rates near b
    (and (alpha(r)-1)/r near 0 for the driftless case).
    """
    r_arr = np.asarray(r, dtype=float)
    s2 = model.sigma2
    a_half = 0.5 * s2 - model.b
    b_half = 0.5 * s2 + model.b
    root = np.sqrt(a_half * a_half + 2.0 * s2 * r_arr)
    out = 2.0 * (r_arr - model.b) / (root + b_half)
    return float(out) if np.isscalar(r) or r_arr.ndim == 0 else out


# ---------------------------------------------------------------------------
# Running costs
# ---------------------------------------------------------------------------


def _central_d1(fn, v, h_rel=1e-6):
    h = h_rel * np.maximum(np.abs(v), 1.0)
    return (fn(v + h) - fn(v - h)) / (2.0 * h)


def _central_d2(fn, v, h_rel=1e-4):
    h = h_rel * np.maximum(np.abs(v), 1.0)
    return (fn(v + h) - 2.0 * fn(v) + fn(v - h)) / (h * h)


@dataclass(frozen=True)
class RunningCost:
    """Running cost f with its declared analytic attributes.

    family is one of "const", "linear", "affine", "power", "table",
    "custom"; the family tag is what lets the perpetual-cost evaluator and
    the Monte Carlo kernel pick closed forms / fast paths.  Declared
    attributes are spot-checked numerically on a grid at construction.
    """

    fn: Callable
    family: str = "custom"
    params: tuple = ()
    d1: Callable | None = None
    d2: Callable | None = None
    increasing: bool | None = True
    concave: bool | None = True
    f0: float = 0.0
    fx0: float = 0.0
    linear_growth: bool = True
    slope_inf: float = 0.0
    growth_const: float = 1.0

    def __post_init__(self):
        self._spot_check()

    def __call__(self, x):
        return self.fn(np.asarray(x, dtype=float))

    def deriv(self, x):
        x = np.asarray(x, dtype=float)
        if self.d1 is not None:
            return self.d1(x)
        return _central_d1(self.fn, x)

    def deriv2(self, x):
        x = np.asarray(x, dtype=float)
        if self.d2 is not None:
            return self.d2(x)
        if self.d1 is not None:
            return _central_d1(self.d1, x)
        return _central_d2(self.fn, x)

    def _spot_check(self, n=41):
        xs = np.geomspace(1e-3, 1e3, n)
        vals = self.fn(xs)
        if not np.all(np.isfinite(vals)):
            raise ValueError("running cost returns non-finite values on the test grid")
        if self.increasing and np.any(np.diff(vals) < -1e-12 * np.maximum(np.abs(vals[:-1]), 1)):
            raise ValueError("running cost declared increasing but decreases on the grid")
        if self.concave:
            mid = self.fn((xs[:-1] + xs[1:]) / 2.0)
            chord = (vals[:-1] + vals[1:]) / 2.0
            if np.any(mid < chord - 1e-9 * np.maximum(np.abs(chord), 1)):
                raise ValueError("running cost declared concave but fails midpoint concavity")
        if self.linear_growth:
            bound = self.growth_const * (xs + 1.0)
            if np.any(np.abs(vals) > bound * (1 + 1e-9)):
                raise ValueError(
                    "running cost exceeds the declared linear growth bound "
                    f"C(x+1) with C={self.growth_const}"
                )

    # -- constructors -------------------------------------------------

    @staticmethod
    def linear() -> "RunningCost":
        """f(x) = x."""
        return RunningCost(
            fn=lambda x: np.asarray(x, dtype=float) + 0.0,
            family="linear",
            d1=lambda x: np.ones_like(np.asarray(x, dtype=float)),
            d2=lambda x: np.zeros_like(np.asarray(x, dtype=float)),
            f0=0.0, fx0=1.0, slope_inf=1.0, growth_const=1.0,
        )

    @staticmethod
    def const(c: float) -> "RunningCost":
        return RunningCost(
            fn=lambda x, c=c: np.full_like(np.asarray(x, dtype=float), c),
            family="const", params=(c,),
            d1=lambda x: np.zeros_like(np.asarray(x, dtype=float)),
            d2=lambda x: np.zeros_like(np.asarray(x, dtype=float)),
            f0=c, fx0=0.0, slope_inf=0.0, growth_const=max(abs(c), 1.0),
        )

    @staticmethod
    def affine(a: float, c: float) -> "RunningCost":
        """f(x) = a*x + c with a >= 0, c >= 0."""
        if a < 0 or c < 0:
            raise ValueError("affine cost requires a >= 0 and c >= 0")
        return RunningCost(
            fn=lambda x, a=a, c=c: a * np.asarray(x, dtype=float) + c,
            family="affine", params=(a, c),
            d1=lambda x, a=a: np.full_like(np.asarray(x, dtype=float), a),
            d2=lambda x: np.zeros_like(np.asarray(x, dtype=float)),
            f0=c, fx0=a, slope_inf=a, growth_const=max(a, c, 1.0),
        )

    @staticmethod
    def power(p: float, a: float = 1.0) -> "RunningCost":
        """f(x) = a*x^p with 0 < p < 1 (increasing, strictly concave)."""
        if not 0 < p < 1 or a <= 0:
            raise ValueError("power cost requires 0 < p < 1 and a > 0")
        return RunningCost(
            fn=lambda x, a=a, p=p: a * np.asarray(x, dtype=float) ** p,
            family="power", params=(p, a),
            d1=lambda x, a=a, p=p: a * p * np.asarray(x, dtype=float) ** (p - 1.0),
            d2=lambda x, a=a, p=p: a * p * (p - 1.0) * np.asarray(x, dtype=float) ** (p - 2.0),
            f0=0.0, fx0=math.inf, slope_inf=0.0, growth_const=max(a, 1.0),
        )

    @staticmethod
    def table(xs, ys) -> "RunningCost":
        """Piecewise-linear interpolation through (xs, ys); extrapolates the
        first/last segment slopes beyond the knot range.

        The derivative is the exact piecewise-constant slope; the second
        derivative is a sum of point masses at the interior knots, which the
        perpetual-cost quadrature integrates analytically (a pointwise f''
        of zero would make L_xx inconsistent with L and L_x).
        """
        xs = np.asarray(xs, dtype=float)
        ys = np.asarray(ys, dtype=float)
        if xs.ndim != 1 or xs.shape != ys.shape or xs.size < 2:
            raise ValueError("table cost needs matching 1-D knots, at least 2")
        if np.any(np.diff(xs) <= 0):
            raise ValueError("table knots must be strictly increasing")
        slopes = np.diff(ys) / np.diff(xs)
        lo_slope, hi_slope = slopes[0], slopes[-1]

        def fn(x):
            x = np.asarray(x, dtype=float)
            out = np.interp(x, xs, ys)
            out = np.where(x < xs[0], ys[0] + lo_slope * (x - xs[0]), out)
            out = np.where(x > xs[-1], ys[-1] + hi_slope * (x - xs[-1]), out)
            return out

        def d1(x):
            x = np.asarray(x, dtype=float)
            idx = np.clip(np.searchsorted(xs, x, side="right") - 1, 0, len(slopes) - 1)
            return slopes[idx]

        f0 = float(fn(np.array(0.0)))
        c_growth = float(max(np.max(np.abs(ys) / (xs + 1.0)), abs(hi_slope), abs(f0), 1.0)) * 2
        increasing = bool(np.all(slopes >= 0))
        concave = bool(np.all(np.diff(slopes) <= 1e-12))
        return RunningCost(
            fn=fn, family="table", params=(tuple(xs), tuple(ys)), d1=d1,
            increasing=increasing, concave=concave,
            f0=f0, fx0=lo_slope, slope_inf=hi_slope, growth_const=c_growth,
        )

    def kink_measure(self) -> tuple[np.ndarray, np.ndarray] | None:
        """(locations, jump sizes) of the point masses in f'' for table
        costs; None for families with a pointwise second derivative."""
        if self.family != "table":
            return None
        xs = np.asarray(self.params[0], dtype=float)
        ys = np.asarray(self.params[1], dtype=float)
        slopes = np.diff(ys) / np.diff(xs)
        jumps = np.diff(slopes)
        keep = jumps != 0.0
        return xs[1:-1][keep], jumps[keep]

    @staticmethod
    def from_callable(fn, *, increasing=None, concave=None, f0=None, fx0=None,
                      linear_growth=True, slope_inf=None, growth_const=None,
                      d1=None, d2=None) -> "RunningCost":
        """Wrap a user callable; undeclared attributes are probed numerically."""
        if f0 is None:
            f0 = float(fn(np.array(0.0)))
        if fx0 is None:
            fx0 = float(_central_d1(fn, np.array(1e-8)))
        if slope_inf is None:
            slope_inf = float(_central_d1(fn, np.array(1e8))) if linear_growth else 0.0
        if growth_const is None:
            xs = np.geomspace(1e-3, 1e6, 19)
            growth_const = float(np.max(np.abs(fn(xs)) / (xs + 1.0))) * 2 + abs(f0)
        return RunningCost(fn=fn, family="custom", d1=d1, d2=d2,
                           increasing=increasing, concave=concave, f0=f0, fx0=fx0,
                           linear_growth=linear_growth, slope_inf=slope_inf,
                           growth_const=growth_const)


@dataclass(frozen=True)
class CostSpec:
    """The pair (running cost f, terminal lump sum K > 0)."""

    f: RunningCost
    K: float

    def __post_init__(self):
        if self.K <= 0:
            raise ValueError("terminal cost K must be strictly positive")


# ---------------------------------------------------------------------------
# Perpetual discounted running cost L(x; r)
# ---------------------------------------------------------------------------


class PerpetualCost(NamedTuple):
    L: np.ndarray | float
    Lx: np.ndarray | float
    Lxx: np.ndarray | float


_GH_CACHE: dict[int, tuple[np.ndarray, np.ndarray]] = {}
_GL_CACHE: dict[int, tuple[np.ndarray, np.ndarray]] = {}


def _gauss_hermite(n: int):
    if n not in _GH_CACHE:
        u, w = np.polynomial.hermite.hermgauss(n)
        _GH_CACHE[n] = (u, w / math.sqrt(math.pi))
    return _GH_CACHE[n]


def _gauss_legendre(n: int):
    if n not in _GL_CACHE:
        _GL_CACHE[n] = np.polynomial.legendre.leggauss(n)
    return _GL_CACHE[n]


def _closed_form(x_arr, r_arr, model, f: RunningCost):
    b = model.b
    if f.family == "const":
        (c,) = f.params
        L = c / r_arr * np.ones_like(x_arr)
        return PerpetualCost(L, np.zeros_like(L), np.zeros_like(L))
    if f.family in ("linear", "affine"):
        if f.family == "linear":
            a, c = 1.0, 0.0
        else:
            a, c = f.params
        if a != 0.0 and np.any(r_arr <= b):
            raise DivergenceError(
                f"L(x;r) diverges for linear-growth cost when r <= b (b={b})"
            )
        L = a * x_arr / (r_arr - b) + c / r_arr
        Lx = a / (r_arr - b) * np.ones_like(x_arr)
        return PerpetualCost(L, Lx, np.zeros_like(L))
    if f.family == "power":
        p, a = f.params
        mu_p = p * b + 0.5 * model.sigma2 * p * (p - 1.0)
        if np.any(r_arr <= mu_p):
            raise DivergenceError(
                f"L(x;r) diverges for power cost with exponent {p} when r <= {mu_p}"
            )
        L = a * x_arr**p / (r_arr - mu_p)
        Lx = a * p * x_arr ** (p - 1.0) / (r_arr - mu_p)
        Lxx = a * p * (p - 1.0) * x_arr ** (p - 2.0) / (r_arr - mu_p)
        return PerpetualCost(L, Lx, Lxx)
    return None


def _quadrature_L(x: float, r_arr: np.ndarray, model: MarketModel, f: RunningCost,
                  gh_nodes: int = 64, rel_tol: float = 1e-9) -> PerpetualCost:
    """Generic route: L = f(0)/r + slope*x/(r-b) + int e^{-rs} E[phi(x Y_s)] ds
    with phi(v) = f(v) - f(0) - slope*v handled by Gauss-Hermite in log space
    and a panel-refined outer time integral."""
    b, s2 = model.b, model.sigma2
    if f.slope_inf != 0.0 and np.any(r_arr <= b):
        raise DivergenceError("L(x;r) diverges when r <= b for linear-growth cost")
    f0, slope = f.f0, f.slope_inf

    def phi(v):
        return f(v) - f0 - slope * v

    def phi_d1(v):
        return f.deriv(v) - slope

    def phi_d2(v):
        return f.deriv2(v)

    u, w = _gauss_hermite(gh_nodes)
    kinks = f.kink_measure()

    def moments_at(s_nodes: np.ndarray):
        # E[g(x Y_s)] for g = phi, y*phi', y^2*phi'' at each s; Y_s lognormal
        drift = (b - 0.5 * s2) * s_nodes[:, None]
        spread = np.sqrt(2.0 * s2 * s_nodes)[:, None] * u[None, :]
        y = np.exp(drift + spread)
        v = x * y
        m0 = phi(v) @ w
        m1 = (y * phi_d1(v)) @ w
        if kinks is None:
            m2 = (y * y * phi_d2(v)) @ w
        else:
            # f'' is a sum of point masses delta(v - k_j) with weight dj:
            # E[Y^2 f''(xY)] = sum_j dj (k_j/x)^2 p_{Y_s}(k_j/x) / x
            locs, jumps = kinks
            y_k = locs[None, :] / x  # (1, n_kinks)
            mu = (b - 0.5 * s2) * s_nodes[:, None]
            var = s2 * s_nodes[:, None]
            dens = np.exp(-((np.log(y_k) - mu) ** 2) / (2.0 * var)) / (
                y_k * np.sqrt(2.0 * math.pi * var))
            m2 = (y_k * y_k * dens) @ jumps / x
        return m0, m1, m2

    r_min = float(np.min(r_arr))
    decay_floor = max(r_min - b, 1e-8)
    s_max = min(60.0 / decay_floor, 1e8)
    edges = [0.0, 1e-4]
    while edges[-1] < s_max:
        edges.append(min(edges[-1] * 1.35, s_max))
    gl_u, gl_w = _gauss_legendre(16)

    L_acc = np.zeros_like(r_arr)
    Lx_acc = np.zeros_like(r_arr)
    Lxx_acc = np.zeros_like(r_arr)
    for a_edge, b_edge in zip(edges[:-1], edges[1:]):
        half = 0.5 * (b_edge - a_edge)
        mid = 0.5 * (a_edge + b_edge)
        s16 = mid + half * gl_u
        m0, m1, m2 = moments_at(s16)
        e16 = np.exp(-np.multiply.outer(r_arr, s16))
        L_acc += half * (e16 * m0[None, :]) @ gl_w
        Lx_acc += half * (e16 * m1[None, :]) @ gl_w
        Lxx_acc += half * (e16 * m2[None, :]) @ gl_w

    m_tail = abs(float(moments_at(np.array([s_max]))[0][0]))
    tail = m_tail * np.exp(-r_arr * s_max) / np.maximum(r_arr - min(b, 0.0), 1e-300)
    scale = np.abs(L_acc) + abs(f0) / r_arr + abs(slope) * x / np.maximum(r_arr - b, 1e-300) + 1e-30
    if np.any(tail > 1e-6 * scale + 1e-12):
        raise AccuracyError(
            f"quadrature tail bound {float(np.max(tail)):.3e} at S_max={s_max:.3e} "
            "exceeds tolerance"
        )

    L = f0 / r_arr + (slope * x / (r_arr - b) if slope != 0.0 else 0.0) + L_acc
    Lx = (slope / (r_arr - b) if slope != 0.0 else np.zeros_like(r_arr)) + Lx_acc
    return PerpetualCost(L, Lx, Lxx_acc)


def perpetual_cost(x, r, model: MarketModel, cost: CostSpec | RunningCost,
                   method: str = "auto", gh_nodes: int = 64) -> PerpetualCost:
    """(L, L_x, L_xx) at state x for rate(s) r.

    method "auto" uses the closed form for the const/linear/affine/power
    families and quadrature otherwise; "quadrature" forces the generic route
    (the dual-route identity tests rely on this); "closed" errors if no
    closed form exists.  x = 0 returns the absorbed-at-zero value f(0)/r.
    """
    f = cost.f if isinstance(cost, CostSpec) else cost
    r_arr = np.atleast_1d(np.asarray(r, dtype=float))
    scalar_r = np.isscalar(r) or np.asarray(r).ndim == 0
    if np.any(r_arr <= 0):
        raise ValueError("perpetual cost requires r > 0")
    if np.isscalar(x) and x == 0.0:
        L = f.f0 / r_arr
        out = PerpetualCost(L, np.full_like(L, f.fx0), np.zeros_like(L))
        return PerpetualCost(*(float(v[0]) if scalar_r else v for v in out))
    x_arr = np.asarray(x, dtype=float)
    if np.any(x_arr < 0):
        raise ValueError("state must be nonnegative")

    if method in ("auto", "closed"):
        closed = _closed_form(x_arr, r_arr, model, f)
        if closed is not None:
            if scalar_r and np.ndim(x) == 0:
                return PerpetualCost(*(float(np.asarray(v).reshape(-1)[0]) for v in closed))
            return closed
        if method == "closed":
            raise ValueError(f"no closed form for cost family {f.family!r}")
    if np.ndim(x) != 0:
        raise ValueError("quadrature route evaluates one state x at a time")
    out = _quadrature_L(float(x), r_arr, model, f, gh_nodes=gh_nodes)
    if scalar_r:
        return PerpetualCost(float(out.L[0]), float(out.Lx[0]), float(out.Lxx[0]))
    return out


# ---------------------------------------------------------------------------
# Admissibility
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AdmissibilityCheck:
    name: str
    passed: bool
    mandatory: bool
    detail: str

    def to_json_dict(self):
        return {"name": self.name, "passed": self.passed,
                "mandatory": self.mandatory, "detail": self.detail}


@dataclass(frozen=True)
class AdmissibilityReport:
    checks: tuple[AdmissibilityCheck, ...]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks if c.mandatory)

    @property
    def failures(self) -> tuple[AdmissibilityCheck, ...]:
        return tuple(c for c in self.checks if c.mandatory and not c.passed)

    def require(self) -> None:
        if not self.passed:
            names = ", ".join(f"{c.name} ({c.detail})" for c in self.failures)
            raise AdmissibilityError(f"admissibility failed: {names}")

    def to_json_dict(self):
        return {"passed": self.passed, "checks": [c.to_json_dict() for c in self.checks]}


def admissibility(model: MarketModel, dist: WeightingDistribution,
                  cost: CostSpec) -> AdmissibilityReport:
    """Well-posedness checks before any solver runs.

    Covers: drift below every rate in supp(F); finiteness of E[R], E[1/R],
    E[1/(R-b)]; f(0) < r*K at the distribution's mean rate; and a numeric
    scan that x f_x(x) grows without bound (rules out the never-stop case).
    """
    checks = []
    floor = dist.rate_floor
    if dist.support_reaches_zero:
        ok = model.b <= 0.0
        detail = f"supp(F) reaches 0 so b <= 0 required; b={model.b}"
    else:
        ok = model.b < floor
        detail = f"b={model.b} vs rate floor {floor}"
    checks.append(AdmissibilityCheck("drift_below_support", ok, True, detail))

    for name, fn in (
        ("mean_rate_finite", lambda: mean_rate(dist)),
        ("inverse_rate_finite", lambda: inverse_rate(dist)),
    ):
        try:
            res = fn()
            checks.append(AdmissibilityCheck(name, True, True, f"value={res.value:.6g}"))
        except DivergentMomentError as exc:
            checks.append(AdmissibilityCheck(name, False, True, str(exc)))

    try:
        res = inverse_rate_shifted(dist, model.b)
        checks.append(AdmissibilityCheck("inverse_rate_shifted_finite", True, True,
                                         f"value={res.value:.6g}"))
    except (DivergentMomentError, ValueError) as exc:
        checks.append(AdmissibilityCheck("inverse_rate_shifted_finite", False, True, str(exc)))

    r_bar = mean_rate(dist).value
    f0 = cost.f.f0
    ok = f0 < r_bar * cost.K
    checks.append(AdmissibilityCheck(
        "running_cost_below_terminal_at_zero", ok, True,
        f"f(0)={f0:.6g} vs mean-rate*K={r_bar * cost.K:.6g}"))

    xs = np.geomspace(1e2, 1e8, 7)
    g = xs * np.asarray(cost.f.deriv(xs), dtype=float)
    grows = bool(g[-1] > 10.0 * max(g[0], 1e-12) and g[-1] > max(cost.K * r_bar, 1e-9))
    checks.append(AdmissibilityCheck(
        "running_cost_growth", grows, True,
        f"x*f_x(x) scan: {g[0]:.4g} -> {g[-1]:.4g}"))

    return AdmissibilityReport(tuple(checks))


# ---------------------------------------------------------------------------
# Terminal-cost reduction
# ---------------------------------------------------------------------------


def reduce_terminal_cost(cost: CostSpec, g: Callable, r: float, model: MarketModel,
                         dg: Callable | None = None,
                         d2g: Callable | None = None) -> CostSpec:
    """Fold a twice-differentiable terminal cost g into the running cost.

    Returns the cost spec with running cost
        f~(x) = f(x) + (1/2) sigma^2 x^2 g''(x) + b x g'(x) - r (g(x) - K)
    and the constant terminal lump sum K, so that solvers only ever see a
    constant terminal cost.
    """
    if r <= 0:
        raise ValueError("reduction rate r must be positive")
    g_d1 = dg if dg is not None else (lambda v: _central_d1(g, v))
    g_d2 = d2g if d2g is not None else (lambda v: _central_d2(g, v))
    probe = np.array([0.5, 1.0, 2.0, 10.0])
    for h_rel in (1e-4, 5e-5):
        vals = (g(probe + h_rel * probe) - 2 * g(probe) + g(probe - h_rel * probe)) / (
            (h_rel * probe) ** 2)
        if not np.all(np.isfinite(vals)):
            raise ValueError("terminal cost g is not (numerically) twice differentiable")
    if dg is None or d2g is None:
        coarse = _central_d2(g, probe, h_rel=1e-3)
        fine = _central_d2(g, probe, h_rel=1e-4)
        scale = np.abs(coarse) + np.abs(fine) + 1.0
        if np.any(np.abs(coarse - fine) > 0.2 * scale):
            raise ValueError("terminal cost g has an unstable second derivative; "
                             "supply analytic dg/d2g")

    K, f, b, s2 = cost.K, cost.f, model.b, model.sigma2

    def f_tilde(x):
        x = np.asarray(x, dtype=float)
        return f(x) + 0.5 * s2 * x * x * g_d2(x) + b * x * g_d1(x) - r * (g(x) - K)

    reduced = RunningCost.from_callable(f_tilde, increasing=None, concave=None,
                                        linear_growth=f.linear_growth)
    return CostSpec(f=reduced, K=K)
