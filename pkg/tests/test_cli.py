"""Command-line front end: configs, reports, exit codes, determinism."""

import json

import numpy as np
import pytest
import yaml

from eqstop.cli import main
from eqstop.config import ConfigError, load_config, parse_config

from oracles import XB_LINEAR


def write_cfg(tmp_path, name, payload):
    p = tmp_path / name
    p.write_text(yaml.safe_dump(payload))
    return str(p)


BASE = {
    "mode": "realoption",
    "discount": {"variant": "pseudoexp", "delta": 0.5, "r": 0.05, "lam": 10.0},
    "model": {"b": 0.0, "sigma": 0.2},
    "cost": {"family": "linear", "K": 1.0},
}


class TestConfig:
    def test_round_trip_lossless(self, tmp_path):
        path = write_cfg(tmp_path, "c.yaml", BASE)
        cfg = load_config(path)
        again = parse_config(cfg.to_dict())
        assert again == cfg

    def test_unknown_key_rejected_with_location(self):
        bad = dict(BASE)
        bad["model"] = {"b": 0.0, "sigma": 0.2, "vol": 0.3}
        with pytest.raises(ConfigError, match=r"config\.model.*vol"):
            parse_config(bad)

    def test_unknown_top_level_key(self):
        with pytest.raises(ConfigError, match="config"):
            parse_config({**BASE, "extra_section": {}})

    def test_missing_required(self):
        with pytest.raises(ConfigError, match="missing"):
            parse_config({"mode": "realoption", "discount": BASE["discount"],
                          "model": BASE["model"]})

    def test_json_input_accepted(self, tmp_path):
        p = tmp_path / "c.json"
        p.write_text(json.dumps(BASE))
        assert load_config(str(p)).mode == "realoption"

    def test_benchmark_mode_needs_single_rate(self):
        bad = dict(BASE)
        bad["mode"] = "benchmark"
        with pytest.raises(ConfigError, match="benchmark"):
            parse_config(bad)

    def test_cost_family_param_mismatch(self):
        bad = dict(BASE)
        bad["cost"] = {"family": "linear", "K": 1.0, "p": 0.5}
        with pytest.raises(ConfigError, match=r"config\.cost"):
            parse_config(bad)

    def test_numeric_and_gamma_variants(self, tmp_path, capsys):
        for discount in (
            {"variant": "numeric", "rates": [0.05, 0.06], "weights": [0.5, 0.5]},
            {"variant": "gamma", "k": 2.0, "theta": 0.01, "n_nodes": 48},
            {"variant": "mixture", "atoms": [[0.5, 0.05], [0.5, 0.06]]},
        ):
            cfg = {**BASE, "discount": discount}
            rc = main(["analyze", "--config", write_cfg(tmp_path, "c.yaml", cfg)])
            out = json.loads(capsys.readouterr().out)
            assert rc == 0
            assert out["result"]["verdict"] == "EquilibriumViaSP"

    def test_table_cost_through_cli(self, tmp_path, capsys):
        xs = [float(v) for v in np.geomspace(1e-3, 1e3, 40)]
        cfg = {
            "mode": "equilibrium",
            "discount": {"variant": "mixture", "atoms": [[0.5, 0.05], [0.5, 0.06]]},
            "model": {"b": 0.0, "sigma": 0.2},
            "cost": {"family": "table", "K": 1.0, "xs": xs,
                     "ys": [float(np.sqrt(v)) for v in xs]},
        }
        rc = main(["analyze", "--config", write_cfg(tmp_path, "c.yaml", cfg)])
        out = json.loads(capsys.readouterr().out)
        assert rc == 0
        assert out["result"]["verdict"]["kind"] == "EquilibriumViaSP"

    def test_power_cost_through_cli(self, tmp_path, capsys):
        cfg = {
            "mode": "equilibrium",
            "discount": {"variant": "degenerate", "r": 0.05},
            "model": {"b": 0.0, "sigma": 0.2},
            "cost": {"family": "power", "K": 1.0, "p": 0.5},
        }
        rc = main(["analyze", "--config", write_cfg(tmp_path, "c.yaml", cfg)])
        out = json.loads(capsys.readouterr().out)
        assert rc == 0
        assert out["result"]["verdict"]["kind"] == "EquilibriumViaSP"


class TestAnalyze:
    def test_degenerate_real_option(self, tmp_path, capsys):
        cfg = dict(BASE)
        cfg["discount"] = {"variant": "degenerate", "r": 0.05}
        rc = main(["analyze", "--config", write_cfg(tmp_path, "c.yaml", cfg)])
        out = json.loads(capsys.readouterr().out)
        assert rc == 0
        assert out["result"]["verdict"] == "EquilibriumViaSP"
        assert out["result"]["x_star"] == pytest.approx(XB_LINEAR, rel=1e-9)
        assert out["tool"]["name"] == "eqstop" and "version" in out["tool"]
        assert out["config"]["mode"] == "realoption"

    def test_wide_gap_no_equilibrium(self, tmp_path, capsys):
        rc = main(["analyze", "--config", write_cfg(tmp_path, "c.yaml", BASE)])
        out = json.loads(capsys.readouterr().out)
        assert rc == 0
        assert out["result"]["verdict"] == "NoEquilibrium"
        assert out["result"]["margin"] < 0

    def test_equilibrium_mode_verdict_schema(self, tmp_path, capsys):
        cfg = dict(BASE)
        cfg["mode"] = "equilibrium"
        rc = main(["analyze", "--config", write_cfg(tmp_path, "c.yaml", cfg)])
        out = json.loads(capsys.readouterr().out)
        assert rc == 0
        v = out["result"]["verdict"]
        assert set(v) == {"kind", "x_star", "running_floor", "concavity_margin",
                          "monotone_ok"}
        assert v["kind"] in ("SPFails_RunningCost", "SPFails_Convexity")

    def test_benchmark_mode_report(self, tmp_path, capsys):
        cfg = {"mode": "benchmark",
               "discount": {"variant": "degenerate", "r": 0.05},
               "model": {"b": 0.0, "sigma": 0.2},
               "cost": {"family": "linear", "K": 1.0}}
        rc = main(["analyze", "--config", write_cfg(tmp_path, "c.yaml", cfg)])
        out = json.loads(capsys.readouterr().out)
        assert rc == 0
        res = out["result"]
        assert res["x_threshold"] == pytest.approx(XB_LINEAR, rel=1e-9)
        assert len(res["value_samples"]) == 5

    def test_admissibility_failure_exit_2(self, tmp_path, capsys):
        cfg = {"mode": "equilibrium",
               "discount": {"variant": "ghd", "beta": 0.02, "gamma": 0.01},
               "model": {"b": 0.01, "sigma": 0.2},
               "cost": {"family": "linear", "K": 1.0}}
        rc = main(["analyze", "--config", write_cfg(tmp_path, "c.yaml", cfg)])
        out = json.loads(capsys.readouterr().out)
        assert rc == 2
        assert out["error"]["kind"] == "admissibility"
        assert any(c["name"] == "drift_below_support" and not c["passed"]
                   for c in out["admissibility"]["checks"])

    def test_byte_identical_reruns(self, tmp_path):
        path = write_cfg(tmp_path, "c.yaml", BASE)
        out1, out2 = str(tmp_path / "a.json"), str(tmp_path / "b.json")
        assert main(["analyze", "--config", path, "--out", out1]) == 0
        assert main(["analyze", "--config", path, "--out", out2]) == 0
        assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()

    def test_missing_config_exit_2(self, capsys):
        assert main(["analyze", "--config", "/nonexistent.yaml"]) == 2

    def test_format_mismatch_exit_2(self, tmp_path):
        path = write_cfg(tmp_path, "c.yaml", BASE)
        assert main(["analyze", "--config", path, "--format", "csv"]) == 2


class TestSweep:
    def sweep_cfg(self, points=50):
        return {**BASE, "sweep": {
            "family": "pseudoexp", "sigma": 0.2, "K": 1.0,
            "fixed": {"delta": 0.5, "r": 0.05},
            "axes": [{"param": "lam", "start": 0.01, "stop": 10.0,
                      "points": points, "scale": "log"}]}}

    def test_single_sign_change(self, tmp_path):
        out = tmp_path / "s.csv"
        rc = main(["sweep", "--config",
                   write_cfg(tmp_path, "c.yaml", self.sweep_cfg()),
                   "--out", str(out)])
        assert rc == 0
        lines = out.read_text().strip().splitlines()
        assert lines[0] == "delta,r,lam,x_star,sp_lhs,sp_rhs,margin,verdict"
        margins = [float(l.split(",")[6]) for l in lines[1:]]
        signs = np.sign(margins)
        assert margins[0] > 0 > margins[-1]
        assert np.count_nonzero(np.diff(signs) != 0) == 1
        verdicts = {l.split(",")[7] for l in lines[1:]}
        assert verdicts == {"EquilibriumViaSP", "NoEquilibrium"}
        # plot data alongside
        plot = (tmp_path / "s.plot.csv").read_text().strip().splitlines()
        assert plot[0] == "lam,margin"
        assert len(plot) == len(lines)

    def test_ghd_certificate_regime_all_equilibrium(self, tmp_path):
        cfg = {**BASE, "sweep": {
            "family": "ghd", "sigma": 0.2, "K": 1.0,
            "fixed": {"gamma": 0.005},
            "axes": [{"param": "beta", "start": 0.006, "stop": 0.02,
                      "points": 10, "scale": "linear"}]}}
        out = tmp_path / "g.csv"
        rc = main(["sweep", "--config", write_cfg(tmp_path, "c.yaml", cfg),
                   "--out", str(out)])
        assert rc == 0
        rows = out.read_text().strip().splitlines()[1:]
        assert len(rows) == 10
        assert all(r.endswith("EquilibriumViaSP") for r in rows)

    def test_divergent_cells_marked_na(self, tmp_path):
        # beta <= gamma gives shape <= 1: inverse-rate moment diverges
        cfg = {**BASE, "sweep": {
            "family": "ghd", "sigma": 0.2, "K": 1.0,
            "fixed": {"gamma": 0.01},
            "axes": [{"param": "beta", "start": 0.005, "stop": 0.02,
                      "points": 4, "scale": "linear"}]}}
        out = tmp_path / "na.csv"
        rc = main(["sweep", "--config", write_cfg(tmp_path, "c.yaml", cfg),
                   "--out", str(out)])
        assert rc == 0
        rows = [l.split(",") for l in out.read_text().strip().splitlines()[1:]]
        assert len(rows) == 4
        assert any(r[-1] == "NA" for r in rows)
        assert any(r[-1] != "NA" for r in rows)

    def test_empty_grid_header_only(self, tmp_path):
        out = tmp_path / "e.csv"
        rc = main(["sweep", "--config",
                   write_cfg(tmp_path, "c.yaml", self.sweep_cfg(points=0)),
                   "--out", str(out)])
        assert rc == 0
        assert out.read_text().strip() == "delta,r,lam,x_star,sp_lhs,sp_rhs,margin,verdict"

    def test_two_axis_grid(self, tmp_path):
        cfg = {**BASE, "sweep": {
            "family": "pseudoexp", "sigma": 0.2, "K": 1.0,
            "fixed": {"r": 0.05},
            "axes": [{"param": "delta", "start": 0.2, "stop": 0.8, "points": 3},
                     {"param": "lam", "start": 0.1, "stop": 5.0, "points": 4,
                      "scale": "log"}]}}
        out = tmp_path / "t.csv"
        rc = main(["sweep", "--config", write_cfg(tmp_path, "c.yaml", cfg),
                   "--out", str(out)])
        assert rc == 0
        lines = out.read_text().strip().splitlines()
        assert len(lines) == 1 + 12
        plot = (tmp_path / "t.plot.csv").read_text().strip().splitlines()
        assert plot[0] == "delta,lam,margin"

    def test_sweep_deterministic(self, tmp_path):
        path = write_cfg(tmp_path, "c.yaml", self.sweep_cfg(points=12))
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        main(["sweep", "--config", path, "--out", str(a)])
        main(["sweep", "--config", path, "--out", str(b)])
        assert a.read_bytes() == b.read_bytes()

    def test_family_flag_conflict(self, tmp_path):
        path = write_cfg(tmp_path, "c.yaml", self.sweep_cfg(points=3))
        assert main(["sweep", "--config", path, "--family", "ghd"]) == 2


class TestVerifyCommand:
    def small_verify(self, extra=None):
        cfg = {
            "mode": "realoption",
            "discount": {"variant": "ghd", "beta": 0.02, "gamma": 0.01},
            "model": {"b": 0.0, "sigma": 0.2},
            "cost": {"family": "linear", "K": 1.0},
            "verify": {"paths": 4000, "seed": 9, "mc_point_fractions": [0.6],
                       "epsilons": [0.02, 0.01], **(extra or {})},
        }
        return cfg

    def test_equilibrium_case_exit_0(self, tmp_path):
        path = write_cfg(tmp_path, "c.yaml", self.small_verify())
        out = tmp_path / "v.json"
        assert main(["verify", "--config", path, "--out", str(out)]) == 0
        rep = json.loads(out.read_text())
        assert rep["verification"]["consistent"]
        assert rep["verification"]["expected_kind"] == "EquilibriumViaSP"

    def test_failure_case_confirmed_exit_0(self, tmp_path):
        cfg = self.small_verify()
        cfg["discount"] = {"variant": "pseudoexp", "delta": 0.5, "r": 0.05, "lam": 10.0}
        path = write_cfg(tmp_path, "c.yaml", cfg)
        out = tmp_path / "v.json"
        assert main(["verify", "--config", path, "--out", str(out)]) == 0
        rep = json.loads(out.read_text())
        assert rep["verification"]["expected_kind"] == "NoEquilibrium"
        assert rep["verification"]["consistent"]
        assert rep["verification"]["bellman_residuals"]["obstacle_violations"]

    def test_forced_threshold_mismatch_exit_3(self, tmp_path):
        cfg = self.small_verify({"x_star_override": None})
        # off by 10 percent
        from eqstop.realoption import analyze_real_option
        from eqstop.discounting import GammaWeights
        xs = analyze_real_option(0.2, 1.0, GammaWeights(k=2.0, theta=0.01)).x_star
        cfg["verify"]["x_star_override"] = 1.1 * xs
        path = write_cfg(tmp_path, "c.yaml", cfg)
        out = tmp_path / "v.json"
        assert main(["verify", "--config", path, "--out", str(out)]) == 3
        rep = json.loads(out.read_text())
        assert not rep["verification"]["pasting_residual_ok"]

    def test_benchmark_mode_verify(self, tmp_path):
        cfg = {
            "mode": "benchmark",
            "discount": {"variant": "degenerate", "r": 0.05},
            "model": {"b": 0.0, "sigma": 0.2},
            "cost": {"family": "linear", "K": 1.0},
            "verify": {"paths": 4000, "seed": 4, "mc_point_fractions": [0.5],
                       "epsilons": [0.01]},
        }
        path = write_cfg(tmp_path, "c.yaml", cfg)
        assert main(["verify", "--config", path, "--out",
                     str(tmp_path / "v.json")]) == 0


class TestFlagOverrides:
    def test_mode_flag_overrides_config(self, tmp_path, capsys):
        cfg = dict(BASE)  # config says realoption
        path = write_cfg(tmp_path, "c.yaml", cfg)
        rc = main(["analyze", "--config", path, "--mode", "equilibrium"])
        out = json.loads(capsys.readouterr().out)
        assert rc == 0
        assert out["mode"] == "equilibrium"
        assert "verdict" in out["result"]

    def test_mode_flag_revalidates(self, tmp_path, capsys):
        # benchmark mode requires a single-rate discount, so the override
        # must hit the same validation as the config field
        path = write_cfg(tmp_path, "c.yaml", BASE)
        assert main(["analyze", "--config", path, "--mode", "benchmark"]) == 2

    def test_verify_flag_overrides(self, tmp_path):
        cfg = {
            "mode": "realoption",
            "discount": {"variant": "ghd", "beta": 0.02, "gamma": 0.01},
            "model": {"b": 0.0, "sigma": 0.2},
            "cost": {"family": "linear", "K": 1.0},
            "verify": {"paths": 999_999, "seed": 9, "mc_point_fractions": [0.6],
                       "epsilons": [0.09]},
        }
        path = write_cfg(tmp_path, "c.yaml", cfg)
        out = tmp_path / "v.json"
        rc = main(["verify", "--config", path, "--out", str(out),
                   "--paths", "2000", "--epsilons", "0.02,0.01"])
        assert rc == 0
        rep = json.loads(out.read_text())
        assert rep["config"]["verify"]["paths"] == 2000
        assert rep["config"]["verify"]["epsilons"] == [0.02, 0.01]

    def test_env_seed_override(self, tmp_path, monkeypatch, capsys):
        cfg = {
            "mode": "realoption",
            "discount": {"variant": "degenerate", "r": 0.05},
            "model": {"b": 0.0, "sigma": 0.2},
            "cost": {"family": "linear", "K": 1.0},
        }
        path = write_cfg(tmp_path, "c.yaml", cfg)
        monkeypatch.setenv("EQSTOP_SEED", "123")
        rc = main(["analyze", "--config", path])
        out = json.loads(capsys.readouterr().out)
        assert rc == 0 and out["effective_seed"] == 123
        # explicit --seed beats the env var
        rc = main(["analyze", "--config", path, "--seed", "7"])
        out = json.loads(capsys.readouterr().out)
        assert rc == 0 and out["effective_seed"] == 7


class TestBernsteinCommand:
    def test_report_fields(self, tmp_path, capsys):
        cfg = {"mode": "realoption",
               "discount": {"variant": "cadi", "c": 1.0},
               "model": {"b": 0.0, "sigma": 0.2},
               "cost": {"family": "linear", "K": 1.0},
               "bernstein": {"t_start": 0.5, "t_stop": 20.0, "t_points": 10,
                             "max_order": 4}}
        rc = main(["bernstein", "--config", write_cfg(tmp_path, "c.yaml", cfg)])
        out = json.loads(capsys.readouterr().out)
        assert rc == 0
        res = out["result"]
        assert res["verdict"].startswith("consistent")
        assert set(res["rows"][0]) == {"order", "t", "value", "violation"}

    def test_violating_discount_reported(self, tmp_path, capsys):
        cfg = {"mode": "realoption",
               "discount": {"variant": "constant_sensitivity", "a": 1.0, "k": 2.0},
               "model": {"b": 0.0, "sigma": 0.2},
               "cost": {"family": "linear", "K": 1.0},
               "bernstein": {"t_start": 0.35, "t_stop": 2.0, "t_points": 12,
                             "t_scale": "linear", "max_order": 4}}
        rc = main(["bernstein", "--config", write_cfg(tmp_path, "c.yaml", cfg)])
        out = json.loads(capsys.readouterr().out)
        assert rc == 0
        assert out["result"]["verdict"].startswith("violates complete monotonicity")
        assert out["result"]["violations"]
