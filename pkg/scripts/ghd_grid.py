#!/usr/bin/env python3
"""Gamma-weighting (generalized hyperbolic) certificate grid.

Scans (beta, gamma) with gamma < beta <= sigma^2/2, checks the certificate
chain in every cell, and cross-checks the grid residuals of the assembled
candidate.  Emits a CSV suitable for contour plotting of the margin.
"""

import argparse
import sys

import numpy as np

from eqstop import (
    CostSpec,
    GammaWeights,
    MarketModel,
    RunningCost,
    bellman_residuals,
    default_verification_grid,
    ghd_certificate,
    solve_candidate,
)


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--sigma", type=float, default=0.2)
    ap.add_argument("--n", type=int, default=10, help="grid points per axis")
    ap.add_argument("--residuals", action="store_true",
                    help="also run the grid residual check per cell (slower)")
    ap.add_argument("--out", default="ghd_grid.csv")
    args = ap.parse_args()

    cap = args.sigma**2 / 2.0
    model = MarketModel(b=0.0, sigma=args.sigma)
    cost = CostSpec(f=RunningCost.linear(), K=1.0)
    rows = ["beta,gamma,x_star,margin,certified,verdict,residuals_pass"]
    n_cells = 0
    for gamma in np.linspace(0.05 * cap, 0.95 * cap, args.n):
        for beta in gamma + (cap - gamma) * np.linspace(0.1, 1.0, args.n):
            cert = ghd_certificate(float(beta), float(gamma), args.sigma)
            resid_txt = ""
            if args.residuals:
                cand = solve_candidate(model, cost,
                                       GammaWeights(k=float(beta / gamma),
                                                    theta=float(gamma)))
                rep = bellman_residuals(cand, default_verification_grid(cand.x_star))
                resid_txt = str(rep.passed)
            rows.append(",".join([
                "%.17g" % beta, "%.17g" % gamma,
                "%.17g" % cert.analysis.x_star, "%.17g" % cert.analysis.margin,
                str(cert.certified), cert.analysis.verdict.value, resid_txt,
            ]))
            n_cells += 1
    with open(args.out, "w") as fh:
        fh.write("\n".join(rows) + "\n")
    certified = sum("True" in r.split(",")[4] for r in rows[1:])
    print(f"wrote {args.out}: {n_cells} cells, {certified} certified")
    return 0


if __name__ == "__main__":
    sys.exit(main())
