#!/usr/bin/env python3
"""Pseudo-exponential flip study.

Sweeps the rate gap of the two-atom weighting, locates the margin's
down-crossing (where the verdict flips from equilibrium-via-pasting to
no-equilibrium), and writes the sweep as CSV.
"""

import argparse
import sys

import numpy as np

from eqstop import FiniteMixture, analyze_real_option, lambda_flip_search


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--delta", type=float, default=0.5)
    ap.add_argument("--r", type=float, default=0.05)
    ap.add_argument("--sigma", type=float, default=0.2)
    ap.add_argument("--terminal", type=float, default=1.0, help="stop cost K")
    ap.add_argument("--lam-lo", type=float, default=0.01)
    ap.add_argument("--lam-hi", type=float, default=10.0)
    ap.add_argument("--points", type=int, default=50)
    ap.add_argument("--out", default="flip_study.csv")
    args = ap.parse_args()

    rows = ["lam,x_star,sp_lhs,sp_rhs,margin,verdict"]
    for lam in np.geomspace(args.lam_lo, args.lam_hi, args.points):
        dist = FiniteMixture(((args.delta, args.r),
                              (1 - args.delta, args.r + float(lam))))
        an = analyze_real_option(args.sigma, args.terminal, dist)
        rows.append(",".join("%.17g" % v for v in
                             (lam, an.x_star, an.sp_lhs, an.sp_rhs, an.margin))
                    + f",{an.verdict.value}")
    with open(args.out, "w") as fh:
        fh.write("\n".join(rows) + "\n")
    print(f"wrote {args.out} ({args.points} rows)")

    flip = lambda_flip_search(args.delta, args.r, args.sigma, args.terminal,
                              lo=args.lam_lo, hi=args.lam_hi)
    if flip.found:
        print(f"flip point: lambda* = {flip.lambda_star:.6g} "
              f"(single crossing: {flip.single_crossing})")
        for side, lam in (("below", flip.lambda_star * 0.99),
                          ("above", flip.lambda_star * 1.01)):
            dist = FiniteMixture(((args.delta, args.r),
                                  (1 - args.delta, args.r + lam)))
            an = analyze_real_option(args.sigma, args.terminal, dist)
            print(f"  {side}: margin = {an.margin:+.4g} -> {an.verdict.value}")
    else:
        print(f"no flip found: {flip.reason}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
