"""Weighted discount functions and their rate-weighting distributions.

A weighted discount function (WDF) is a Laplace transform of a probability
distribution F over discount rates, h(t) = E[exp(-R t)] with R ~ F.  This
module represents both sides of that identity: the mixing distribution F
(atoms, finite mixtures, Gamma weights, raw numeric nodes) and the discount
function h (closed forms plus a quadrature-backed form built from F).  It
also provides rate moments of F with divergence detection, and a
finite-difference complete-monotonicity test that checks whether a given h
is consistent with being a WDF at all.

All objects are immutable after construction and all operations are pure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, NamedTuple, Sequence

import numpy as np
from scipy import special, stats

__all__ = [
    "DivergentMomentError",
    "WeightingDistribution",
    "Degenerate",
    "FiniteMixture",
    "GammaWeights",
    "NumericWeights",
    "DiscountFunction",
    "Exponential",
    "PseudoExponential",
    "GeneralizedHyperbolic",
    "ConstantSensitivity",
    "CADI",
    "FromWeights",
    "MomentResult",
    "evaluate_discount",
    "evaluate_moment",
    "mean_rate",
    "inverse_rate",
    "inverse_rate_shifted",
    "BernsteinReport",
    "bernstein_report",
    "build_weighting",
    "build_discount",
]

_WEIGHT_TOL = 1e-12


class DivergentMomentError(ValueError):
    """A requested rate moment does not exist (diverges)."""


@lru_cache(maxsize=64)
def _genlaguerre_nodes(n: int, alpha: float) -> tuple[np.ndarray, np.ndarray]:
    # nodes/weights for the weight u^alpha e^{-u}; weights renormalized so
    # they sum to 1 (i.e. divided by Gamma(alpha+1)).
    u, w = special.roots_genlaguerre(n, alpha)
    return u, w / math.gamma(alpha + 1.0)


# ---------------------------------------------------------------------------
# Weighting distributions
# ---------------------------------------------------------------------------


class WeightingDistribution:
    """Mixing distribution F over exponential discount rates.

    Subclasses provide quadrature nodes/weights so that every integral
    against F downstream (discount values, rate moments, candidate
    equations, equilibrium conditions) is computed by the same rule and
    shares the same error characteristics.
    """

    @property
    def rate_floor(self) -> float:
        """Essential infimum of the support of F."""
        raise NotImplementedError

    @property
    def support_reaches_zero(self) -> bool:
        return self.rate_floor <= 0.0

    @property
    def is_atomic(self) -> bool:
        """True when F is a finite sum of atoms (quadrature is exact)."""
        raise NotImplementedError

    def nodes(self) -> tuple[np.ndarray, np.ndarray]:
        """Quadrature nodes and probability weights (weights sum to 1)."""
        raise NotImplementedError

    def refined_nodes(self) -> tuple[np.ndarray, np.ndarray]:
        """A finer node set, used only for error estimation."""
        return self.nodes()

    def expectation(self, g: Callable[[np.ndarray], np.ndarray]) -> float:
        r, w = self.nodes()
        return float(np.dot(w, np.asarray(g(r), dtype=float)))

    def expectation_with_error(self, g) -> "MomentResult":
        r, w = self.nodes()
        val = float(np.dot(w, np.asarray(g(r), dtype=float)))
        if self.is_atomic:
            return MomentResult(val, 0.0)
        r2, w2 = self.refined_nodes()
        val2 = float(np.dot(w2, np.asarray(g(r2), dtype=float)))
        return MomentResult(val, abs(val - val2))

    def quantile_probe(self, n: int = 200) -> np.ndarray:
        """Representative rates across the support (atoms, or quantiles of
        a density), used for monotonicity scans over supp(F)."""
        raise NotImplementedError

    def discount(self, t) -> np.ndarray | float:
        """h(t) = E[exp(-R t)] computed through the quadrature nodes."""
        t_arr = np.asarray(t, dtype=float)
        if np.any(t_arr < 0):
            raise ValueError("discount function is defined for t >= 0 only")
        r, w = self.nodes()
        out = np.exp(-np.multiply.outer(t_arr, r)) @ w
        return float(out) if np.isscalar(t) or t_arr.ndim == 0 else out

    def discount_tail_integral(self, t) -> np.ndarray | float:
        """E[exp(-R t)/R] = integral of h over [t, inf)."""
        t_arr = np.asarray(t, dtype=float)
        r, w = self.nodes()
        out = (np.exp(-np.multiply.outer(t_arr, r)) / r) @ w
        return float(out) if np.isscalar(t) or t_arr.ndim == 0 else out


@dataclass(frozen=True)
class Degenerate(WeightingDistribution):
    """Point mass at a single rate (classical exponential discounting)."""

    r0: float

    def __post_init__(self):
        if self.r0 <= 0:
            raise ValueError(f"rate must be strictly positive, got {self.r0}")

    @property
    def rate_floor(self) -> float:
        return self.r0

    @property
    def is_atomic(self) -> bool:
        return True

    def nodes(self):
        return np.array([self.r0]), np.array([1.0])

    def quantile_probe(self, n: int = 200) -> np.ndarray:
        return np.array([self.r0])


@dataclass(frozen=True)
class FiniteMixture(WeightingDistribution):
    """Finitely many atoms (weight, rate); weights sum to 1."""

    atoms: tuple[tuple[float, float], ...]

    def __post_init__(self):
        if not self.atoms:
            raise ValueError("mixture needs at least one atom")
        object.__setattr__(self, "atoms", tuple((float(w), float(r)) for w, r in self.atoms))
        ws = np.array([w for w, _ in self.atoms])
        rs = np.array([r for _, r in self.atoms])
        if np.any(ws < 0):
            raise ValueError("weights must be nonnegative")
        if abs(ws.sum() - 1.0) > _WEIGHT_TOL:
            raise ValueError(f"weights must sum to 1 within {_WEIGHT_TOL}, got {ws.sum()!r}")
        if np.any(rs <= 0):
            raise ValueError("all rates must be strictly positive")

    @property
    def rate_floor(self) -> float:
        return min(r for _, r in self.atoms)

    @property
    def is_atomic(self) -> bool:
        return True

    def nodes(self):
        ws = np.array([w for w, _ in self.atoms])
        rs = np.array([r for _, r in self.atoms])
        return rs, ws

    def quantile_probe(self, n: int = 200) -> np.ndarray:
        return np.sort(np.array([r for _, r in self.atoms]))


@dataclass(frozen=True)
class GammaWeights(WeightingDistribution):
    """Gamma(shape k, scale theta) weighting; the Laplace transform is the
    generalized hyperbolic discount (1 + theta*t)^(-k)."""

    k: float
    theta: float
    n_nodes: int = 64

    def __post_init__(self):
        if self.k <= 0 or self.theta <= 0:
            raise ValueError("Gamma weights require k > 0 and theta > 0")
        if self.n_nodes < 2:
            raise ValueError("need at least 2 quadrature nodes")

    @property
    def rate_floor(self) -> float:
        return 0.0

    @property
    def is_atomic(self) -> bool:
        return False

    def nodes(self):
        u, w = _genlaguerre_nodes(self.n_nodes, self.k - 1.0)
        return self.theta * u, w

    def refined_nodes(self):
        u, w = _genlaguerre_nodes(self.n_nodes + self.n_nodes // 2, self.k - 1.0)
        return self.theta * u, w

    def quantile_probe(self, n: int = 200) -> np.ndarray:
        q = (np.arange(n) + 0.5) / n
        return stats.gamma.ppf(q, self.k, scale=self.theta)

    def discount(self, t):
        # exact Laplace transform; the generic node route stays available
        # through nodes() for the dual-route identity tests
        t_arr = np.asarray(t, dtype=float)
        if np.any(t_arr < 0):
            raise ValueError("discount function is defined for t >= 0 only")
        out = (1.0 + self.theta * t_arr) ** (-self.k)
        return float(out) if np.isscalar(t) or t_arr.ndim == 0 else out

    def discount_tail_integral(self, t):
        if self.k <= 1.0:
            raise DivergentMomentError(
                f"integral of h diverges for Gamma weights with k={self.k} <= 1")
        t_arr = np.asarray(t, dtype=float)
        out = (1.0 + self.theta * t_arr) ** (1.0 - self.k) / (self.theta * (self.k - 1.0))
        return float(out) if np.isscalar(t) or t_arr.ndim == 0 else out


@dataclass(frozen=True)
class NumericWeights(WeightingDistribution):
    """Raw node/weight pairs supplied by the user; treated as atoms."""

    rates: tuple[float, ...]
    weights: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "rates", tuple(float(r) for r in self.rates))
        object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))
        if len(self.rates) != len(self.weights) or not self.rates:
            raise ValueError("rates and weights must be equal-length, nonempty")
        ws = np.array(self.weights)
        if np.any(ws < 0):
            raise ValueError("weights must be nonnegative")
        if abs(ws.sum() - 1.0) > _WEIGHT_TOL:
            raise ValueError(f"weights must sum to 1 within {_WEIGHT_TOL}")
        if np.any(np.array(self.rates) <= 0):
            raise ValueError("all rates must be strictly positive")

    @property
    def rate_floor(self) -> float:
        return min(self.rates)

    @property
    def is_atomic(self) -> bool:
        return True

    def nodes(self):
        return np.array(self.rates), np.array(self.weights)

    def quantile_probe(self, n: int = 200) -> np.ndarray:
        return np.sort(np.array(self.rates))


# ---------------------------------------------------------------------------
# Rate moments
# ---------------------------------------------------------------------------


class MomentResult(NamedTuple):
    value: float
    error: float


def mean_rate(dist: WeightingDistribution) -> MomentResult:
    """E[R]."""
    if isinstance(dist, GammaWeights):
        return MomentResult(dist.k * dist.theta, 0.0)
    return dist.expectation_with_error(lambda r: r)


def inverse_rate(dist: WeightingDistribution) -> MomentResult:
    """E[1/R]; raises DivergentMomentError when the integral diverges."""
    if isinstance(dist, GammaWeights):
        # integrable iff k > 1 (r^{k-2} e^{-r/theta} near 0); decided
        # symbolically, never by inspecting a large quadrature value
        if dist.k <= 1.0:
            raise DivergentMomentError(
                f"E[1/R] diverges for Gamma weights with shape k={dist.k} <= 1"
            )
        return MomentResult(1.0 / (dist.theta * (dist.k - 1.0)), 0.0)
    return dist.expectation_with_error(lambda r: 1.0 / r)


def inverse_rate_shifted(dist: WeightingDistribution, b: float) -> MomentResult:
    """E[1/(R - b)] for b below the support (or b <= 0).

    A shift at or above the essential infimum of the support puts a
    non-integrable singularity inside (or at the edge of) the support, so
    it raises DivergentMomentError rather than returning a large number.
    """
    floor = dist.rate_floor
    if not (b < floor or b <= 0.0):
        raise DivergentMomentError(
            f"E[1/(R-b)] diverges: shift b={b} is not below the rate floor {floor}"
        )
    if isinstance(dist, GammaWeights):
        if b == 0.0:
            return inverse_rate(dist)
        return dist.expectation_with_error(lambda r: 1.0 / (r - b))
    return dist.expectation_with_error(lambda r: 1.0 / (r - b))


def evaluate_moment(
    dist: WeightingDistribution,
    kind: str,
    *,
    shift: float | None = None,
    integrand: Callable[[np.ndarray], np.ndarray] | None = None,
) -> MomentResult:
    """Rate moment of F by kind.

    kind is one of "mean_rate", "inverse_rate", "inverse_rate_shifted"
    (requires shift) or "weighted" (requires integrand; returns E[g(R)]).
    Atom-supported distributions are summed exactly; densities use the
    distribution's quadrature with an error estimate from a refined rule.
    """
    if kind == "mean_rate":
        return mean_rate(dist)
    if kind == "inverse_rate":
        return inverse_rate(dist)
    if kind == "inverse_rate_shifted":
        if shift is None:
            raise ValueError("inverse_rate_shifted requires shift=")
        return inverse_rate_shifted(dist, shift)
    if kind == "weighted":
        if integrand is None:
            raise ValueError("weighted moment requires integrand=")
        return dist.expectation_with_error(integrand)
    raise ValueError(f"unknown moment kind {kind!r}")


# ---------------------------------------------------------------------------
# Discount functions
# ---------------------------------------------------------------------------


class DiscountFunction:
    """h: [0, inf) -> (0, 1], h(0) = 1, strictly decreasing."""

    def __call__(self, t):
        raise NotImplementedError

    def weighting(self) -> WeightingDistribution | None:
        """The mixing distribution when a tractable one is known."""
        return None

    def _check_t(self, t) -> np.ndarray:
        t_arr = np.asarray(t, dtype=float)
        if np.any(t_arr < 0):
            raise ValueError("discount function is defined for t >= 0 only")
        return t_arr

    def _ret(self, t, out):
        return float(out) if np.isscalar(t) or np.asarray(t).ndim == 0 else out


@dataclass(frozen=True)
class Exponential(DiscountFunction):
    r: float

    def __post_init__(self):
        if self.r <= 0:
            raise ValueError("rate must be positive")

    def __call__(self, t):
        t_arr = self._check_t(t)
        return self._ret(t, np.exp(-self.r * t_arr))

    def weighting(self):
        return Degenerate(self.r)


@dataclass(frozen=True)
class PseudoExponential(DiscountFunction):
    """delta*exp(-r t) + (1-delta)*exp(-(r+lam) t)."""

    delta: float
    r: float
    lam: float

    def __post_init__(self):
        if not 0 < self.delta < 1:
            raise ValueError("delta must lie in (0, 1)")
        if self.r <= 0 or self.lam <= 0:
            raise ValueError("r and lam must be positive")

    def __call__(self, t):
        t_arr = self._check_t(t)
        out = self.delta * np.exp(-self.r * t_arr) + (1 - self.delta) * np.exp(
            -(self.r + self.lam) * t_arr
        )
        return self._ret(t, out)

    def weighting(self):
        return FiniteMixture(((self.delta, self.r), (1 - self.delta, self.r + self.lam)))


@dataclass(frozen=True)
class GeneralizedHyperbolic(DiscountFunction):
    """(1 + gamma*t)^(-beta/gamma)."""

    beta: float
    gamma: float

    def __post_init__(self):
        if self.beta <= 0 or self.gamma <= 0:
            raise ValueError("beta and gamma must be positive")

    def __call__(self, t):
        t_arr = self._check_t(t)
        return self._ret(t, (1.0 + self.gamma * t_arr) ** (-self.beta / self.gamma))

    def weighting(self):
        return GammaWeights(k=self.beta / self.gamma, theta=self.gamma)


@dataclass(frozen=True)
class ConstantSensitivity(DiscountFunction):
    """exp(-a * t^k).  Completely monotone only for 0 < k <= 1; accepted for
    any a, k > 0 so the Bernstein test can report what it actually finds."""

    a: float
    k: float

    def __post_init__(self):
        if self.a <= 0 or self.k <= 0:
            raise ValueError("a and k must be positive")

    def __call__(self, t):
        t_arr = self._check_t(t)
        return self._ret(t, np.exp(-self.a * t_arr**self.k))


@dataclass(frozen=True)
class CADI(DiscountFunction):
    """exp(exp(-c t) - 1): constant absolute decreasing impatience."""

    c: float

    def __post_init__(self):
        if self.c <= 0:
            raise ValueError("c must be positive")

    def __call__(self, t):
        t_arr = self._check_t(t)
        return self._ret(t, np.exp(np.exp(-self.c * t_arr) - 1.0))


@dataclass(frozen=True)
class FromWeights(DiscountFunction):
    """h built from a weighting distribution by quadrature/exact summation."""

    dist: WeightingDistribution

    def __call__(self, t):
        t_arr = self._check_t(t)
        r, w = self.dist.nodes()
        out = np.exp(-np.multiply.outer(t_arr, r)) @ w
        return self._ret(t, out)

    def weighting(self):
        return self.dist


def evaluate_discount(h: DiscountFunction, t) -> float | np.ndarray:
    """h(t); raises on negative t, result always in (0, 1]."""
    return h(t)


# ---------------------------------------------------------------------------
# Complete monotonicity (Bernstein) test
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BernsteinRow:
    order: int
    t: float
    value: float  # (-1)^n * forward difference of order n
    violation: bool

    def to_json_dict(self) -> dict:
        return {"order": self.order, "t": self.t, "value": self.value,
                "violation": self.violation}


@dataclass(frozen=True)
class BernsteinReport:
    rows: tuple[BernsteinRow, ...]
    violations: tuple[BernsteinRow, ...]
    max_order: int
    spacing: float
    verdict: str

    @property
    def clean(self) -> bool:
        return not self.violations

    def to_json_dict(self) -> dict:
        return {
            "max_order": self.max_order,
            "spacing": self.spacing,
            "verdict": self.verdict,
            "rows": [r.to_json_dict() for r in self.rows],
            "violations": [r.to_json_dict() for r in self.violations],
        }


def bernstein_report(
    h: DiscountFunction,
    t_grid: Sequence[float],
    max_order: int = 6,
    spacing: float = 0.05,
    rel_tolerance: float = 1e-7,
) -> BernsteinReport:
    """Finite-difference test of complete monotonicity.

    A genuine weighted discount function has (-1)^n h^(n)(t) >= 0 for every
    order n; the same sign property holds exactly for forward differences,
    so any value of (-1)^n Delta^n h below -rel_tolerance*h(t) is flagged.
    The test treats h as a black box (no symbolic derivatives).
    """
    if max_order > 8:
        raise ValueError("max_order > 8: finite-difference noise dominates")
    if spacing <= 0:
        raise ValueError("spacing must be positive")
    t_arr = np.asarray(t_grid, dtype=float)
    if np.any(t_arr <= spacing * max_order):
        raise ValueError("t_grid must lie above spacing*max_order")

    rows = []
    coeffs = {
        n: np.array([(-1) ** (n - j) * math.comb(n, j) for j in range(n + 1)])
        for n in range(1, max_order + 1)
    }
    for t in t_arr:
        base = h(t + spacing * np.arange(max_order + 1))
        h_t = float(h(t))
        for n in range(1, max_order + 1):
            diff = float(np.dot(coeffs[n], base[: n + 1]))
            signed = (-1) ** n * diff
            viol = signed < -rel_tolerance * h_t
            rows.append(BernsteinRow(order=n, t=float(t), value=signed, violation=viol))
    violations = tuple(r for r in rows if r.violation)
    if violations:
        worst = min(violations, key=lambda r: r.value)
        verdict = (
            f"violates complete monotonicity at (n={worst.order}, t={worst.t:g})"
        )
    else:
        verdict = "consistent with a weighted discount function"
    return BernsteinReport(
        rows=tuple(rows),
        violations=violations,
        max_order=max_order,
        spacing=spacing,
        verdict=verdict,
    )


# ---------------------------------------------------------------------------
# Construction from parsed config
# ---------------------------------------------------------------------------

_REQUIRED_KEYS = {
    "degenerate": {"r"},
    "exponential": {"r"},
    "pseudoexp": {"delta", "r", "lam"},
    "ghd": {"beta", "gamma"},
    "gamma": {"k", "theta"},
    "mixture": {"atoms"},
    "numeric": {"rates", "weights"},
    "constant_sensitivity": {"a", "k"},
    "cadi": {"c"},
}


def _check_keys(spec: dict, variant: str, allowed: set[str]) -> None:
    extra = set(spec) - allowed - {"variant", "n_nodes"}
    if extra:
        raise ValueError(f"unknown keys for discount variant {variant!r}: {sorted(extra)}")
    missing = _REQUIRED_KEYS[variant] - set(spec)
    if missing:
        raise ValueError(f"discount variant {variant!r} missing keys: {sorted(missing)}")


def build_weighting(spec: dict) -> WeightingDistribution:
    """Validated weighting distribution from a parsed config mapping.

    Recognized variants: degenerate/exponential {r}, pseudoexp {delta, r,
    lam}, ghd {beta, gamma}, gamma {k, theta}, mixture {atoms: [[w, r],...]},
    numeric {rates, weights}.  Gamma variants accept n_nodes (default 64).
    """
    variant = spec.get("variant")
    if variant not in _REQUIRED_KEYS:
        raise ValueError(f"unknown discount variant {variant!r}")
    if variant in ("constant_sensitivity", "cadi"):
        raise ValueError(
            f"variant {variant!r} has no tractable weighting distribution; "
            "it is usable only as a discount function (e.g. for the bernstein command)"
        )
    _check_keys(spec, variant, _REQUIRED_KEYS[variant])
    n_nodes = int(spec.get("n_nodes", 64))
    if variant in ("degenerate", "exponential"):
        return Degenerate(float(spec["r"]))
    if variant == "pseudoexp":
        d, r, lam = float(spec["delta"]), float(spec["r"]), float(spec["lam"])
        return FiniteMixture(((d, r), (1 - d, r + lam)))
    if variant == "ghd":
        beta, gamma = float(spec["beta"]), float(spec["gamma"])
        return GammaWeights(k=beta / gamma, theta=gamma, n_nodes=n_nodes)
    if variant == "gamma":
        return GammaWeights(k=float(spec["k"]), theta=float(spec["theta"]), n_nodes=n_nodes)
    if variant == "mixture":
        return FiniteMixture(tuple((float(w), float(r)) for w, r in spec["atoms"]))
    return NumericWeights(tuple(float(r) for r in spec["rates"]),
                          tuple(float(w) for w in spec["weights"]))


def build_discount(spec: dict) -> DiscountFunction:
    """Discount function from a parsed config mapping (all variants)."""
    variant = spec.get("variant")
    if variant not in _REQUIRED_KEYS:
        raise ValueError(f"unknown discount variant {variant!r}")
    _check_keys(spec, variant, _REQUIRED_KEYS[variant])
    if variant in ("degenerate", "exponential"):
        return Exponential(float(spec["r"]))
    if variant == "pseudoexp":
        return PseudoExponential(float(spec["delta"]), float(spec["r"]), float(spec["lam"]))
    if variant == "ghd":
        return GeneralizedHyperbolic(float(spec["beta"]), float(spec["gamma"]))
    if variant == "constant_sensitivity":
        return ConstantSensitivity(float(spec["a"]), float(spec["k"]))
    if variant == "cadi":
        return CADI(float(spec["c"]))
    return FromWeights(build_weighting(spec))
