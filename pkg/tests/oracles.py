"""Independent oracles used to freeze expected values.

Everything here deliberately avoids the library's own code paths: the
characteristic exponent comes from numpy's polynomial root finder, Gamma
moments from adaptive quadrature over the density, and atom moments from
explicit sums.
"""

import numpy as np
from scipy import integrate, special


def alpha_poly_root(r, b, sigma):
    """Positive root of (sigma^2/2) a^2 + (b - sigma^2/2) a - r = 0 via np.roots."""
    roots = np.roots([0.5 * sigma**2, b - 0.5 * sigma**2, -r])
    pos = roots[roots > 0]
    return float(np.max(pos))


def atom_expectation(atoms, g):
    """Exact E[g(R)] for a list of (weight, rate) atoms."""
    return sum(w * g(r) for w, r in atoms)


def gamma_expectation(g, k, theta):
    """E[g(R)] for R ~ Gamma(k, theta) by adaptive quadrature (not nodes)."""
    def integrand(r):
        return g(r) * r ** (k - 1.0) * np.exp(-r / theta) / (theta**k * special.gamma(k))
    val, _ = integrate.quad(integrand, 0.0, np.inf, limit=200)
    return val


def real_option_sides(atoms_or_gamma, sigma, K):
    """(lhs, rhs, x_star) of the dichotomy from first principles."""
    def a(r):
        return alpha_poly_root(r, 0.0, sigma)

    if isinstance(atoms_or_gamma, tuple) and len(atoms_or_gamma) == 2 \
            and np.isscalar(atoms_or_gamma[0]):
        k, theta = atoms_or_gamma
        e = lambda g: gamma_expectation(g, k, theta)
    else:
        e = lambda g: atom_expectation(atoms_or_gamma, g)
    i_alpha = e(a)
    i_r = e(lambda r: r)
    i_prem = e(lambda r: (a(r) - 1.0) / r)
    return i_alpha, i_r * i_prem, K * i_alpha / i_prem


# Values frozen from a 30-digit mpmath evaluation of the same formulas
# (computed before the library was written).
ALPHA_005 = 2.15831239517769992455746636834      # alpha(0.05), b=0, sigma=0.2
ALPHA_006 = 2.30277563773199464655961063374
ALPHA_1005 = 22.9220873247786634339350252737     # alpha(10.05)
XB_LINEAR = 0.0931662479035539984911493273667    # alpha*r*K/(alpha-1) at r=0.05, K=1
PE_MARGIN_LAM001 = 0.996366698479948114045443791322
PE_MARGIN_LAM10 = -51.4623642054574680104765459606
PE_XSTAR_LAM10 = 0.989460503928308662186161065148
TWOATOM_XSTAR_005_006 = 0.0994021840446039358168199738017
GHD_K2_TH001_I_ALPHA = 1.57783977120939923577193561537
GHD_K2_TH001_XSTAR = 0.0481283819040245302272272634098
GHD_K2_TH001_MARGIN = 0.922160228790600764228064384635
GHD_VALUE_AT_08XSTAR = 0.970707137442064981079199039659
