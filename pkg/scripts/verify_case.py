#!/usr/bin/env python3
"""End-to-end verification of one canonical case.

Cases:
  benchmark   exponential discounting at r = 0.05 (classical threshold)
  ghd         Gamma weighting beta=0.02, gamma=0.01 (equilibrium holds)
  widegap     pseudo-exponential delta=0.5, r=0.05, lam=10 (no equilibrium)

Runs the grid residuals, the necessary-condition scans, the analytic and
Monte Carlo spike probes, and prints the consistency verdict.
"""

import argparse
import json
import sys

from eqstop import (
    CostSpec,
    Degenerate,
    FiniteMixture,
    GammaWeights,
    MarketModel,
    RunningCost,
    SimulationConfig,
    VerdictKind,
    classify_candidate,
    run_verification,
    solve_benchmark,
    solve_candidate,
)

CASES = {
    "benchmark": Degenerate(0.05),
    "ghd": GammaWeights(k=2.0, theta=0.01),
    "widegap": FiniteMixture(((0.5, 0.05), (0.5, 10.05))),
}


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("case", choices=sorted(CASES))
    ap.add_argument("--paths", type=int, default=50_000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default=None, help="write the full JSON report here")
    args = ap.parse_args()

    model = MarketModel(b=0.0, sigma=0.2)
    cost = CostSpec(f=RunningCost.linear(), K=1.0)
    dist = CASES[args.case]
    if args.case == "benchmark":
        sol = solve_benchmark(model, cost, 0.05)
        expected = VerdictKind.EQUILIBRIUM_VIA_SP
        print(f"threshold x_B = {sol.threshold:.8g}")
    else:
        sol = solve_candidate(model, cost, dist)
        expected = classify_candidate(sol).kind
        print(f"candidate threshold x* = {sol.threshold:.8g}, "
              f"classified: {expected.value}")

    cfg = SimulationConfig(paths=args.paths, dt=1e-3, seed=args.seed)
    rep = run_verification(sol, dist, expected, sim_cfg=cfg)
    print(f"pasting residual ok: {rep.pasting_residual_ok}")
    print(f"grid residuals pass: {rep.residuals.passed} "
          f"(obstacle violations: {len(rep.residuals.obstacle_violations)})")
    print(f"value bound clean: {rep.value_bound.clean}; "
          f"floor scan clean: {rep.continuation_floor.clean}")
    for c in rep.mc_checks:
        print(f"mc @ x={c['x']:.6g}: estimate {c['estimate']:.6f} "
              f"(closed {c['closed_value']:.6f}, se {c['std_error']:.1e}) "
              f"within 3se: {c['within_3se']}")
    print(f"CONSISTENT WITH VERDICT: {rep.consistent} -- {rep.explanation}")
    if args.out:
        with open(args.out, "w") as fh:
            json.dump(rep.to_json_dict(), fh, indent=2, default=str)
        print(f"wrote {args.out}")
    return 0 if rep.consistent else 3


if __name__ == "__main__":
    sys.exit(main())
