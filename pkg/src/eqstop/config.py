"""Config file parsing and validation for the command-line front end.

Configs are structured text (YAML; JSON is a subset and parses through the
same loader).  Parsing is strict: unknown keys are rejected with their
dotted location, and the parse -> resolve -> serialize round trip is
lossless once defaults are materialized.  The grammar is documented in
docs/config.md.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .discounting import build_discount, build_weighting
from .model import CostSpec, MarketModel, RunningCost
from .stopping import SimulationConfig

__all__ = ["ConfigError", "AnalysisConfig", "load_config", "parse_config"]

_MODES = ("benchmark", "equilibrium", "realoption")


class ConfigError(ValueError):
    """Invalid configuration; message carries the dotted key location."""


def _require_mapping(d, path):
    if not isinstance(d, dict):
        raise ConfigError(f"{path}: expected a mapping, got {type(d).__name__}")


def _check_keys(d: dict, allowed: set[str], required: set[str], path: str):
    _require_mapping(d, path)
    unknown = set(d) - allowed
    if unknown:
        raise ConfigError(f"{path}: unknown keys {sorted(unknown)} "
                          f"(allowed: {sorted(allowed)})")
    missing = required - set(d)
    if missing:
        raise ConfigError(f"{path}: missing required keys {sorted(missing)}")


def _num(d, key, path, default=None, required=False):
    if key not in d:
        if required:
            raise ConfigError(f"{path}.{key}: required")
        return default
    v = d[key]
    if v is None and not required:
        return None
    if not isinstance(v, (int, float)) or isinstance(v, bool):
        raise ConfigError(f"{path}.{key}: expected a number, got {v!r}")
    return float(v)


@dataclass(frozen=True)
class GridAxis:
    param: str
    start: float
    stop: float
    points: int
    scale: str = "linear"  # or "log"

    def values(self):
        import numpy as np
        if self.points == 0:
            return np.zeros(0)
        if self.points == 1:
            return np.array([self.start])
        if self.scale == "log":
            return np.geomspace(self.start, self.stop, self.points)
        return np.linspace(self.start, self.stop, self.points)

    def to_dict(self):
        return {"param": self.param, "start": self.start, "stop": self.stop,
                "points": self.points, "scale": self.scale}


@dataclass(frozen=True)
class SweepSpec:
    family: str  # pseudoexp | ghd
    sigma: float
    K: float
    fixed: dict
    axes: tuple[GridAxis, ...]

    def to_dict(self):
        return {"family": self.family, "sigma": self.sigma, "K": self.K,
                "fixed": dict(self.fixed), "axes": [a.to_dict() for a in self.axes]}


@dataclass(frozen=True)
class BernsteinOptions:
    t_start: float = 0.5
    t_stop: float = 50.0
    t_points: int = 40
    t_scale: str = "log"
    max_order: int = 6
    spacing: float = 0.05
    rel_tolerance: float = 1e-7

    def t_grid(self):
        import numpy as np
        if self.t_scale == "log":
            return np.geomspace(self.t_start, self.t_stop, self.t_points)
        return np.linspace(self.t_start, self.t_stop, self.t_points)

    def to_dict(self):
        return {"t_start": self.t_start, "t_stop": self.t_stop,
                "t_points": self.t_points, "t_scale": self.t_scale,
                "max_order": self.max_order, "spacing": self.spacing,
                "rel_tolerance": self.rel_tolerance}


@dataclass(frozen=True)
class VerifyOptions:
    paths: int = 100_000
    dt: float = 1e-3
    t_max: float | None = None
    seed: int = 0
    antithetic: bool = True
    epsilons: tuple[float, ...] = (0.1, 0.05, 0.02, 0.01)
    mc_point_fractions: tuple[float, ...] = (0.5, 0.8)
    x_star_override: float | None = None

    def sim_config(self, seed_override: int | None = None) -> SimulationConfig:
        return SimulationConfig(paths=self.paths, dt=self.dt, t_max=self.t_max,
                                seed=self.seed if seed_override is None else seed_override,
                                antithetic=self.antithetic)

    def to_dict(self):
        return {"paths": self.paths, "dt": self.dt, "t_max": self.t_max,
                "seed": self.seed, "antithetic": self.antithetic,
                "epsilons": list(self.epsilons),
                "mc_point_fractions": list(self.mc_point_fractions),
                "x_star_override": self.x_star_override}


@dataclass(frozen=True)
class AnalysisConfig:
    mode: str
    discount: dict
    b: float
    sigma: float
    cost_family: str
    K: float
    cost_params: dict
    verify: VerifyOptions = field(default_factory=VerifyOptions)
    sweep: SweepSpec | None = None
    bernstein: BernsteinOptions = field(default_factory=BernsteinOptions)

    # -- materialization ------------------------------------------------

    def market_model(self) -> MarketModel:
        return MarketModel(b=self.b, sigma=self.sigma)

    def weighting(self):
        return build_weighting(self.discount)

    def discount_function(self):
        return build_discount(self.discount)

    def cost_spec(self) -> CostSpec:
        fam, p = self.cost_family, self.cost_params
        if fam == "linear":
            f = RunningCost.linear()
        elif fam == "const":
            f = RunningCost.const(p["c"])
        elif fam == "affine":
            f = RunningCost.affine(p["a"], p["c"])
        elif fam == "power":
            f = RunningCost.power(p["p"], p.get("a", 1.0))
        elif fam == "table":
            f = RunningCost.table(p["xs"], p["ys"])
        else:
            raise ConfigError(f"cost.family: unknown family {fam!r}")
        return CostSpec(f=f, K=self.K)

    def to_dict(self) -> dict:
        out = {
            "mode": self.mode,
            "discount": dict(self.discount),
            "model": {"b": self.b, "sigma": self.sigma},
            "cost": {"family": self.cost_family, "K": self.K, **self.cost_params},
            "verify": self.verify.to_dict(),
            "bernstein": self.bernstein.to_dict(),
        }
        if self.sweep is not None:
            out["sweep"] = self.sweep.to_dict()
        return out


def parse_config(raw: dict) -> AnalysisConfig:
    """Validate a parsed mapping into an AnalysisConfig (strict keys)."""
    _check_keys(raw, {"mode", "discount", "model", "cost", "verify", "sweep",
                      "bernstein"}, {"mode", "discount", "model", "cost"}, "config")
    mode = raw["mode"]
    if mode not in _MODES:
        raise ConfigError(f"config.mode: {mode!r} not one of {_MODES}")

    discount = raw["discount"]
    _require_mapping(discount, "config.discount")
    try:
        build_discount(discount)
    except (ValueError, KeyError) as exc:
        raise ConfigError(f"config.discount: {exc}") from exc
    if mode == "benchmark" and discount.get("variant") not in ("degenerate", "exponential"):
        raise ConfigError("config.discount: benchmark mode needs a degenerate/"
                          "exponential discount (a single rate)")

    model_d = raw["model"]
    _check_keys(model_d, {"b", "sigma"}, {"b", "sigma"}, "config.model")
    b = _num(model_d, "b", "config.model", required=True)
    sigma = _num(model_d, "sigma", "config.model", required=True)
    if sigma <= 0:
        raise ConfigError("config.model.sigma: must be positive")

    cost_d = raw["cost"]
    _check_keys(cost_d, {"family", "K", "a", "c", "p", "xs", "ys"},
                {"family", "K"}, "config.cost")
    fam = cost_d["family"]
    K = _num(cost_d, "K", "config.cost", required=True)
    params_by_family = {"linear": set(), "const": {"c"}, "affine": {"a", "c"},
                        "power": {"p", "a"}, "table": {"xs", "ys"}}
    if fam not in params_by_family:
        raise ConfigError(f"config.cost.family: unknown family {fam!r}")
    extra = set(cost_d) - {"family", "K"} - params_by_family[fam]
    if extra:
        raise ConfigError(f"config.cost: keys {sorted(extra)} not valid for "
                          f"family {fam!r}")
    cost_params = {k: cost_d[k] for k in params_by_family[fam] if k in cost_d}

    verify = VerifyOptions()
    if "verify" in raw and raw["verify"] is not None:
        v = raw["verify"]
        _check_keys(v, {"paths", "dt", "t_max", "seed", "antithetic", "epsilons",
                        "mc_point_fractions", "x_star_override"}, set(), "config.verify")
        verify = VerifyOptions(
            paths=int(v.get("paths", 100_000)),
            dt=_num(v, "dt", "config.verify", default=1e-3),
            t_max=_num(v, "t_max", "config.verify", default=None),
            seed=int(v.get("seed", 0)),
            antithetic=bool(v.get("antithetic", True)),
            epsilons=tuple(float(e) for e in v.get("epsilons", (0.1, 0.05, 0.02, 0.01))),
            mc_point_fractions=tuple(float(p) for p in
                                     v.get("mc_point_fractions", (0.5, 0.8))),
            x_star_override=_num(v, "x_star_override", "config.verify", default=None),
        )

    sweep = None
    if "sweep" in raw and raw["sweep"] is not None:
        s = raw["sweep"]
        _check_keys(s, {"family", "sigma", "K", "fixed", "axes"},
                    {"family", "sigma", "K", "axes"}, "config.sweep")
        family = s["family"]
        if family not in ("pseudoexp", "ghd"):
            raise ConfigError(f"config.sweep.family: {family!r} not pseudoexp/ghd")
        axes = []
        if not isinstance(s["axes"], list) or not 1 <= len(s["axes"]) <= 2:
            raise ConfigError("config.sweep.axes: need a list of 1 or 2 axes")
        valid_params = {"pseudoexp": {"delta", "r", "lam"},
                        "ghd": {"beta", "gamma"}}[family]
        for i, ax in enumerate(s["axes"]):
            _check_keys(ax, {"param", "start", "stop", "points", "scale"},
                        {"param", "start", "stop", "points"}, f"config.sweep.axes[{i}]")
            if ax["param"] not in valid_params:
                raise ConfigError(f"config.sweep.axes[{i}].param: {ax['param']!r} "
                                  f"not in {sorted(valid_params)}")
            scale = ax.get("scale", "linear")
            if scale not in ("linear", "log"):
                raise ConfigError(f"config.sweep.axes[{i}].scale: {scale!r}")
            axes.append(GridAxis(param=ax["param"], start=float(ax["start"]),
                                 stop=float(ax["stop"]), points=int(ax["points"]),
                                 scale=scale))
        fixed = s.get("fixed", {}) or {}
        _require_mapping(fixed, "config.sweep.fixed")
        bad = set(fixed) - valid_params
        if bad:
            raise ConfigError(f"config.sweep.fixed: unknown params {sorted(bad)}")
        sweep = SweepSpec(family=family, sigma=float(s["sigma"]), K=float(s["K"]),
                          fixed={k: float(v) for k, v in fixed.items()},
                          axes=tuple(axes))

    bern = BernsteinOptions()
    if "bernstein" in raw and raw["bernstein"] is not None:
        bd = raw["bernstein"]
        _check_keys(bd, {"t_start", "t_stop", "t_points", "t_scale", "max_order",
                         "spacing", "rel_tolerance"}, set(), "config.bernstein")
        bern = BernsteinOptions(
            t_start=_num(bd, "t_start", "config.bernstein", default=0.5),
            t_stop=_num(bd, "t_stop", "config.bernstein", default=50.0),
            t_points=int(bd.get("t_points", 40)),
            t_scale=bd.get("t_scale", "log"),
            max_order=int(bd.get("max_order", 6)),
            spacing=_num(bd, "spacing", "config.bernstein", default=0.05),
            rel_tolerance=_num(bd, "rel_tolerance", "config.bernstein", default=1e-7),
        )

    return AnalysisConfig(mode=mode, discount=dict(discount), b=b, sigma=sigma,
                          cost_family=fam, K=K, cost_params=cost_params,
                          verify=verify, sweep=sweep, bernstein=bern)


def load_config(path: str | Path) -> AnalysisConfig:
    """Parse a YAML (or JSON) config file."""
    text = Path(path).read_text()
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: not valid YAML/JSON: {exc}") from exc
    if raw is None:
        raise ConfigError(f"{path}: empty config")
    _require_mapping(raw, "config")
    return parse_config(raw)
