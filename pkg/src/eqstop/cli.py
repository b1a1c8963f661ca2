"""Command-line front end: analyze, sweep, verify, bernstein.

Every report embeds the resolved config and the tool version, and is a pure
function of (config, seed): repeated runs produce byte-identical output.
Exit codes: 0 = ok (any verdict), 2 = config or admissibility error,
3 = verification conflict.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .benchmark import solve_benchmark
from .config import AnalysisConfig, ConfigError, load_config, parse_config
from .discounting import (
    DivergentMomentError,
    FiniteMixture,
    GammaWeights,
    bernstein_report,
)
from .equilibrium import candidate_at, classify_candidate, solve_candidate
from .model import AdmissibilityError, admissibility
from .realoption import analyze_real_option
from .roots import SolveError
from .verify import run_verification

__all__ = ["main"]

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_VERIFY_CONFLICT = 3


def _fmt(x: float) -> str:
    return "%.17g" % x


def _emit(text: str, out_path: str | None) -> None:
    if out_path:
        Path(out_path).write_text(text)
    else:
        sys.stdout.write(text)


def _np_default(o):
    if isinstance(o, np.bool_):
        return bool(o)
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


def _json_report(payload: dict, cfg: AnalysisConfig, seed: int | None) -> str:
    report = {
        "tool": {"name": "eqstop", "version": __version__},
        "config": cfg.to_dict(),
        "effective_seed": cfg.verify.seed if seed is None else seed,
        **payload,
    }
    return json.dumps(report, sort_keys=True, indent=2, default=_np_default) + "\n"


def _error_json(kind: str, message: str, cfg: AnalysisConfig | None = None) -> str:
    report: dict = {"tool": {"name": "eqstop", "version": __version__},
                    "error": {"kind": kind, "message": message}}
    if cfg is not None:
        report["config"] = cfg.to_dict()
    return json.dumps(report, sort_keys=True, indent=2, default=_np_default) + "\n"


# ---------------------------------------------------------------------------
# analyze
# ---------------------------------------------------------------------------


def cmd_analyze(cfg: AnalysisConfig, out: str | None, seed: int | None) -> int:
    model = cfg.market_model()
    cost = cfg.cost_spec()
    dist = cfg.weighting()
    report = admissibility(model, dist, cost)
    payload: dict = {"mode": cfg.mode, "admissibility": report.to_json_dict()}
    if not report.passed:
        payload["error"] = {"kind": "admissibility",
                            "message": "; ".join(f"{c.name}: {c.detail}"
                                                 for c in report.failures)}
        _emit(_json_report(payload, cfg, seed), out)
        return EXIT_CONFIG

    if cfg.mode == "benchmark":
        r = float(cfg.discount["r"])
        sol = solve_benchmark(model, cost, r)
        fracs = (0.25, 0.5, 0.75, 1.0, 1.5)
        payload["result"] = {
            "x_threshold": sol.x_threshold,
            "r": r,
            "alpha": sol.alpha,
            "value_samples": [{"x": frac * sol.x_threshold,
                               "value": float(sol.value(frac * sol.x_threshold))}
                              for frac in fracs],
        }
    elif cfg.mode == "equilibrium":
        cand = solve_candidate(model, cost, dist)
        verdict = classify_candidate(cand)
        payload["result"] = {"verdict": verdict.to_json_dict(),
                             "smooth_pasting_residual": cand.value_dx(cand.x_star)}
    else:  # realoption
        if model.b != 0.0:
            _emit(_error_json("config", "realoption mode is driftless (b = 0); "
                              "use equilibrium mode for b != 0", cfg), out)
            return EXIT_CONFIG
        if cfg.cost_family != "linear":
            _emit(_error_json("config", "realoption mode uses the linear running "
                              "cost; use equilibrium mode otherwise", cfg), out)
            return EXIT_CONFIG
        analysis = analyze_real_option(model.sigma, cost.K, dist)
        payload["result"] = analysis.to_json_dict()
    _emit(_json_report(payload, cfg, seed), out)
    return EXIT_OK


# ---------------------------------------------------------------------------
# sweep
# ---------------------------------------------------------------------------


def _sweep_dist(family: str, params: dict):
    if family == "pseudoexp":
        return FiniteMixture(((params["delta"], params["r"]),
                              (1.0 - params["delta"], params["r"] + params["lam"])))
    return GammaWeights(k=params["beta"] / params["gamma"], theta=params["gamma"])


def cmd_sweep(cfg: AnalysisConfig, out: str | None, family_flag: str | None) -> int:
    spec = cfg.sweep
    if spec is None:
        _emit(_error_json("config", "sweep command needs a config sweep section", cfg), out)
        return EXIT_CONFIG
    if family_flag is not None and family_flag != spec.family:
        _emit(_error_json("config", f"--family {family_flag} conflicts with config "
                          f"sweep.family {spec.family}", cfg), out)
        return EXIT_CONFIG
    axes = spec.axes
    axis_names = [a.param for a in axes]
    param_order = {"pseudoexp": ("delta", "r", "lam"), "ghd": ("beta", "gamma")}[spec.family]
    header = [*param_order, "x_star", "sp_lhs", "sp_rhs", "margin", "verdict"]
    lines = [",".join(header)]
    plot_lines = [",".join([*axis_names, "margin"])]

    grids = [a.values() for a in axes]
    cells = [(i,) for i in range(len(grids[0]))]
    if len(grids) == 2:
        cells = [(i, j) for i in range(len(grids[0])) for j in range(len(grids[1]))]

    for idx in cells:
        params = dict(spec.fixed)
        for a, gi, k in zip(axes, grids, idx):
            params[a.param] = float(gi[k])
        missing = set(param_order) - set(params)
        if missing:
            _emit(_error_json("config", f"sweep fixed/axes leave params {sorted(missing)} "
                              "unset", cfg), out)
            return EXIT_CONFIG
        row_params = [_fmt(params[p]) for p in param_order]
        try:
            dist = _sweep_dist(spec.family, params)
            analysis = analyze_real_option(spec.sigma, spec.K, dist)
            row = row_params + [_fmt(analysis.x_star), _fmt(analysis.sp_lhs),
                                _fmt(analysis.sp_rhs), _fmt(analysis.margin),
                                analysis.verdict.value]
            margin_txt = _fmt(analysis.margin)
        except (DivergentMomentError, AdmissibilityError, ValueError):
            row = row_params + ["NA", "NA", "NA", "NA", "NA"]
            margin_txt = "NA"
        lines.append(",".join(row))
        plot_lines.append(",".join([_fmt(params[a.param]) for a in axes] + [margin_txt]))

    _emit("\n".join(lines) + "\n", out)
    if out:
        plot_path = str(Path(out).with_suffix(".plot.csv"))
        Path(plot_path).write_text("\n".join(plot_lines) + "\n")
    return EXIT_OK


# ---------------------------------------------------------------------------
# verify
# ---------------------------------------------------------------------------


def cmd_verify(cfg: AnalysisConfig, out: str | None, seed: int | None) -> int:
    model = cfg.market_model()
    cost = cfg.cost_spec()
    dist = cfg.weighting()
    report = admissibility(model, dist, cost)
    if not report.passed:
        _emit(_error_json("admissibility",
                          "; ".join(f"{c.name}: {c.detail}" for c in report.failures),
                          cfg), out)
        return EXIT_CONFIG

    if cfg.mode == "benchmark":
        sol = solve_benchmark(model, cost, float(cfg.discount["r"]))
        from .equilibrium import VerdictKind
        expected = VerdictKind.EQUILIBRIUM_VIA_SP
        cand = sol
    else:
        solved = solve_candidate(model, cost, dist)
        expected = classify_candidate(solved).kind
        if cfg.mode == "realoption":
            analysis = analyze_real_option(model.sigma, cost.K, dist)
            expected = analysis.verdict
        cand = solved
    if cfg.verify.x_star_override is not None:
        cand = candidate_at(cfg.verify.x_star_override, model, cost, dist)

    sim_cfg = cfg.verify.sim_config(seed_override=seed)
    verification = run_verification(
        cand, dist, expected, sim_cfg=sim_cfg,
        mc_point_fractions=cfg.verify.mc_point_fractions,
        epsilons=cfg.verify.epsilons)
    payload = {"mode": cfg.mode, "admissibility": report.to_json_dict(),
               "verification": verification.to_json_dict()}
    _emit(_json_report(payload, cfg, seed), out)
    return EXIT_OK if verification.consistent else EXIT_VERIFY_CONFLICT


# ---------------------------------------------------------------------------
# bernstein
# ---------------------------------------------------------------------------


def cmd_bernstein(cfg: AnalysisConfig, out: str | None, seed: int | None) -> int:
    h = cfg.discount_function()
    opts = cfg.bernstein
    rep = bernstein_report(h, opts.t_grid(), max_order=opts.max_order,
                           spacing=opts.spacing, rel_tolerance=opts.rel_tolerance)
    payload = {"mode": "bernstein", "result": rep.to_json_dict()}
    _emit(_json_report(payload, cfg, seed), out)
    return EXIT_OK


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="eqstop",
        description="Equilibrium stopping under weighted discounting: "
                    "thresholds, verdicts, sweeps, and verification.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_txt in (
        ("analyze", "solve the configured mode and report the verdict"),
        ("sweep", "parameter sweep over a discount family (CSV)"),
        ("verify", "independent verification of the configured case"),
        ("bernstein", "complete-monotonicity test of the configured discount"),
    ):
        p = sub.add_parser(name, help=help_txt)
        p.add_argument("--config", required=True, help="YAML or JSON config file")
        p.add_argument("--out", default=None, help="output file (default stdout)")
        p.add_argument("--seed", type=int, default=None,
                       help="seed override (beats the EQSTOP_SEED env var)")
        p.add_argument("--threads", type=int, default=None,
                       help="worker threads for path simulation")
        p.add_argument("--format", choices=("json", "csv"), default=None,
                       help="output format (json except sweep, which is csv)")
        if name == "sweep":
            p.add_argument("--family", choices=("pseudoexp", "ghd"), default=None)
        if name in ("analyze", "verify"):
            p.add_argument("--mode", choices=("benchmark", "equilibrium", "realoption"),
                           default=None, help="override the config mode")
        if name == "verify":
            p.add_argument("--paths", type=int, default=None)
            p.add_argument("--dt", type=float, default=None)
            p.add_argument("--tmax", type=float, default=None)
            p.add_argument("--epsilons", type=str, default=None,
                           help="comma-separated spike epsilons")
    return parser


def _apply_overrides(cfg: AnalysisConfig, args) -> AnalysisConfig:
    """Re-parse the resolved config with CLI flag overrides folded in."""
    raw = cfg.to_dict()
    changed = False
    if getattr(args, "mode", None) is not None:
        raw["mode"] = args.mode
        changed = True
    if args.command == "verify":
        v = raw.setdefault("verify", {})
        for key, val in (("paths", args.paths), ("dt", args.dt),
                         ("t_max", args.tmax)):
            if val is not None:
                v[key] = val
                changed = True
        if args.epsilons is not None:
            v["epsilons"] = [float(e) for e in args.epsilons.split(",") if e]
            changed = True
    return parse_config(raw) if changed else cfg


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    if args.threads is not None:
        import numba
        numba.set_num_threads(max(1, args.threads))
    expected_format = "csv" if args.command == "sweep" else "json"
    if args.format is not None and args.format != expected_format:
        sys.stderr.write(f"error: {args.command} emits {expected_format}\n")
        return EXIT_CONFIG
    seed = args.seed
    if seed is None and os.environ.get("EQSTOP_SEED"):
        try:
            seed = int(os.environ["EQSTOP_SEED"])
        except ValueError:
            sys.stderr.write("error: EQSTOP_SEED must be an integer\n")
            return EXIT_CONFIG
    try:
        cfg = _apply_overrides(load_config(args.config), args)
    except (ConfigError, OSError) as exc:
        sys.stderr.write(_error_json("config", str(exc)))
        return EXIT_CONFIG
    try:
        if args.command == "analyze":
            return cmd_analyze(cfg, args.out, seed)
        if args.command == "sweep":
            return cmd_sweep(cfg, args.out, args.family)
        if args.command == "verify":
            return cmd_verify(cfg, args.out, seed)
        return cmd_bernstein(cfg, args.out, seed)
    except (AdmissibilityError, DivergentMomentError, SolveError, ConfigError,
            ValueError) as exc:
        _emit(_error_json("analysis", str(exc), cfg), args.out)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
