"""Driftless real option: closed forms and the existence dichotomy.

With f(x) = x and b = 0 (driftless without loss of generality), L(x;r) = x/r
and everything collapses to rate moments:

    x* = K * E[alpha(R)] / E[(alpha(R)-1)/R],

and the two equilibrium conditions collapse to the single inequality

    E[alpha(R)] >= E[R] * E[(alpha(R)-1)/R].

That inequality is a complete dichotomy for this problem: when it holds the
pasting candidate is an equilibrium, and when it fails no equilibrium
stopping rule exists at all.  This module evaluates both sides, certifies
the Gamma-weighting parameter regime where the inequality provably holds,
and searches the pseudo-exponential family for the flip point where the
verdict changes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .discounting import (
    DivergentMomentError,
    FiniteMixture,
    GammaWeights,
    WeightingDistribution,
    inverse_rate,
    mean_rate,
)
from .equilibrium import VerdictKind
from .model import MarketModel, admissibility, alpha_minus_one, alpha_root, CostSpec, RunningCost

__all__ = [
    "RealOptionAnalysis",
    "analyze_real_option",
    "CertificateLink",
    "GhdCertificate",
    "ghd_certificate",
    "FlipResult",
    "lambda_flip_search",
    "real_option_value",
    "real_option_w",
]


@dataclass(frozen=True)
class RealOptionAnalysis:
    """Both sides of the dichotomy inequality and the resulting verdict."""

    sigma: float
    K: float
    dist: WeightingDistribution
    x_star: float
    sp_lhs: float    # E[alpha(R)]
    sp_rhs: float    # E[R] * E[(alpha(R)-1)/R]
    mean_rate: float
    premium_moment: float  # E[(alpha(R)-1)/R]
    inverse_rate_moment: float

    @property
    def margin(self) -> float:
        return self.sp_lhs - self.sp_rhs

    @property
    def verdict(self) -> VerdictKind:
        return (VerdictKind.EQUILIBRIUM_VIA_SP if self.margin >= 0.0
                else VerdictKind.NO_EQUILIBRIUM)

    @property
    def model(self) -> MarketModel:
        return MarketModel(b=0.0, sigma=self.sigma)

    def value(self, x):
        """Aggregate V(x) from the closed per-rate forms.

        The per-rate value w(x;r) = (K - x*/r)(x/x*)^alpha(r) + x/r is
        bounded as r -> 0 (the 1/r pieces cancel), so it is assembled per
        quadrature node before weighting; quadraturing the two pieces
        separately would reintroduce an integrable singularity.
        """
        x_arr = np.atleast_1d(np.asarray(x, dtype=float))
        out = np.full_like(x_arr, self.K)
        below = x_arr < self.x_star
        if np.any(below):
            r, w = self.dist.nodes()
            a = alpha_root(r, self.model)
            powers = (x_arr[below, None] / self.x_star) ** a[None, :]
            w_vals = (self.K - self.x_star / r)[None, :] * powers \
                + x_arr[below, None] / r[None, :]
            out[below] = w_vals @ w
        return float(out[0]) if np.ndim(x) == 0 else out

    def w(self, x: float, r: float) -> float:
        x, r = float(x), float(r)
        if x >= self.x_star:
            return self.K
        a = alpha_root(r, self.model)
        return (self.K - self.x_star / r) * (x / self.x_star) ** a + x / r

    def to_json_dict(self):
        return {
            "x_star": self.x_star,
            "sp_lhs": self.sp_lhs,
            "sp_rhs": self.sp_rhs,
            "margin": self.margin,
            "verdict": self.verdict.value,
            "mean_rate": self.mean_rate,
            "premium_moment": self.premium_moment,
        }


def analyze_real_option(sigma: float, K: float, dist: WeightingDistribution,
                        require_admissibility: bool = True) -> RealOptionAnalysis:
    """Evaluate the dichotomy for the driftless linear-cost problem.

    Divergent moments raise; otherwise the verdict is total — equilibrium
    via the pasting threshold, or no equilibrium at all.  The certificate
    fallback passes require_admissibility=False: the inequality sides stay
    finite even when E[1/R] does not (the premium integrand is bounded by
    2/sigma^2), and the inverse-rate moment is then reported as nan.
    """
    if sigma <= 0 or K <= 0:
        raise ValueError("sigma and K must be positive")
    model = MarketModel(b=0.0, sigma=sigma)
    cost = CostSpec(f=RunningCost.linear(), K=K)
    report = admissibility(model, dist, cost)
    if require_admissibility:
        report.require()
    try:
        i_inv = inverse_rate(dist).value
    except DivergentMomentError:
        if require_admissibility:
            raise
        i_inv = math.nan

    i_alpha = dist.expectation(lambda r: alpha_root(r, model))
    # (alpha(r)-1)/r in the rationalized form: bounded by 2/sigma^2 near 0
    i_premium = dist.expectation(lambda r: alpha_minus_one(r, model) / r)
    i_r = mean_rate(dist).value
    return RealOptionAnalysis(
        sigma=sigma, K=K, dist=dist,
        x_star=K * i_alpha / i_premium,
        sp_lhs=i_alpha, sp_rhs=i_r * i_premium,
        mean_rate=i_r, premium_moment=i_premium, inverse_rate_moment=i_inv,
    )


# ---------------------------------------------------------------------------
# Gamma-weighting certificate
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CertificateLink:
    name: str
    lhs: float
    rhs: float
    holds: bool

    def to_json_dict(self):
        return {"name": self.name, "lhs": self.lhs, "rhs": self.rhs, "holds": self.holds}


@dataclass(frozen=True)
class GhdCertificate:
    """Result of the inequality-chain certificate for Gamma weights.

    In the regime gamma < beta <= sigma^2/2 the chain
        E[(alpha-1)/R] E[R] <= (2/sigma^2) beta <= 1 <= E[alpha]
    certifies the dichotomy inequality without computing the margin; outside
    the regime the direct evaluation decides.
    """

    beta: float
    gamma: float
    sigma: float
    applicable: bool
    links: tuple[CertificateLink, ...]
    certified: bool
    analysis: RealOptionAnalysis

    @property
    def holds(self) -> bool:
        return self.certified or self.analysis.margin >= 0.0

    def to_json_dict(self):
        return {
            "beta": self.beta, "gamma": self.gamma, "sigma": self.sigma,
            "applicable": self.applicable, "certified": self.certified,
            "links": [l.to_json_dict() for l in self.links],
            "analysis": self.analysis.to_json_dict(),
        }


def ghd_certificate(beta: float, gamma: float, sigma: float, K: float = 1.0) -> GhdCertificate:
    """Check the certificate chain for Gamma(beta/gamma, gamma) weights.

    When gamma < beta <= sigma^2/2 every link is verified numerically
    (tangent bound alpha(r)-1 <= 2r/sigma^2, E[R] = beta, alpha >= 1) and
    the report says so; otherwise the chain is inapplicable and the direct
    margin evaluation is the verdict.
    """
    if beta <= 0 or gamma <= 0 or sigma <= 0:
        raise ValueError("beta, gamma, sigma must be positive")
    dist = GammaWeights(k=beta / gamma, theta=gamma)
    applicable = gamma < beta <= sigma * sigma / 2.0
    analysis = analyze_real_option(sigma, K, dist,
                                   require_admissibility=applicable)
    links: list[CertificateLink] = []
    if applicable:
        model = MarketModel(b=0.0, sigma=sigma)
        probe = np.geomspace(1e-8, 10.0 * sigma * sigma, 200)
        tangent_gap = float(np.min(2.0 * probe / (sigma * sigma)
                                   - alpha_minus_one(probe, model)))
        links.append(CertificateLink("tangent_bound_alpha_minus_one", tangent_gap, 0.0,
                                     tangent_gap >= -1e-12))
        links.append(CertificateLink("mean_rate_equals_beta",
                                     analysis.mean_rate, beta,
                                     abs(analysis.mean_rate - beta) <= 1e-10 * beta))
        prod = analysis.premium_moment * analysis.mean_rate
        cap = 2.0 * beta / (sigma * sigma)
        links.append(CertificateLink("premium_product_below_cap", prod, cap,
                                     prod <= cap + 1e-12))
        links.append(CertificateLink("cap_at_most_one", cap, 1.0, cap <= 1.0 + 1e-12))
        links.append(CertificateLink("alpha_moment_at_least_one",
                                     analysis.sp_lhs, 1.0,
                                     analysis.sp_lhs >= 1.0 - 1e-12))
    certified = applicable and all(l.holds for l in links)
    return GhdCertificate(beta=beta, gamma=gamma, sigma=sigma, applicable=applicable,
                          links=tuple(links), certified=certified, analysis=analysis)


# ---------------------------------------------------------------------------
# Pseudo-exponential flip search
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FlipResult:
    lambda_star: float | None
    found: bool
    single_crossing: bool
    scan_lambdas: tuple[float, ...]
    scan_margins: tuple[float, ...]
    reason: str = ""

    def to_json_dict(self):
        return {
            "lambda_star": self.lambda_star, "found": self.found,
            "single_crossing": self.single_crossing, "reason": self.reason,
            "scan": [{"lam": l, "margin": m}
                     for l, m in zip(self.scan_lambdas, self.scan_margins)],
        }


def _pe_margin(delta: float, r: float, lam: float, sigma: float) -> float:
    dist = FiniteMixture(((delta, r), (1.0 - delta, r + lam)))
    model = MarketModel(b=0.0, sigma=sigma)
    i_alpha = dist.expectation(lambda rr: alpha_root(rr, model))
    i_premium = dist.expectation(lambda rr: alpha_minus_one(rr, model) / rr)
    i_r = mean_rate(dist).value
    return i_alpha - i_r * i_premium


def lambda_flip_search(delta: float, r: float, sigma: float, K: float = 1.0,
                       lo: float = 1e-6, hi: float = 1e4,
                       n_scan: int = 50) -> FlipResult:
    """First down-crossing of the dichotomy margin along the rate gap lam.

    The margin is known to become negative for large lam but single
    crossing is an empirical property, so a log-spaced scan runs first; the
    crossing bracket is then bisected.  No sign change in [lo, hi] yields a
    "no flip found" result instead of an error.
    """
    if not 0 < delta < 1 or r <= 0 or sigma <= 0:
        raise ValueError("need 0 < delta < 1 and positive r, sigma")
    lams = np.geomspace(lo, hi, n_scan)
    margins = np.array([_pe_margin(delta, r, lam, sigma) for lam in lams])
    signs = np.sign(margins)
    crossings = np.nonzero((signs[:-1] > 0) & (signs[1:] <= 0))[0]
    single = crossings.size <= 1 and not np.any((signs[:-1] < 0) & (signs[1:] > 0))
    if margins[0] <= 0.0:
        return FlipResult(None, False, single, tuple(lams), tuple(margins),
                          reason="margin already nonpositive at the lower end")
    if crossings.size == 0:
        return FlipResult(None, False, single, tuple(lams), tuple(margins),
                          reason=f"no flip found: margin stays positive on [{lo:g}, {hi:g}]")
    a, b = float(lams[crossings[0]]), float(lams[crossings[0] + 1])
    for _ in range(200):
        mid = 0.5 * (a + b)
        if b - a <= 1e-12 * max(mid, 1.0):
            break
        if _pe_margin(delta, r, mid, sigma) > 0.0:
            a = mid
        else:
            b = mid
    return FlipResult(0.5 * (a + b), True, single, tuple(lams), tuple(margins))


def real_option_value(analysis: RealOptionAnalysis, x):
    """Closed-form V(x) for the real option (K at and above x*)."""
    return analysis.value(x)


def real_option_w(analysis: RealOptionAnalysis, r: float, x: float) -> float:
    """Closed-form per-rate value w(x; r)."""
    return analysis.w(x, r)
