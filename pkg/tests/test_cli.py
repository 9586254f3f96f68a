import json
from pathlib import Path

import numpy as np
import pytest

from fmpp.cli import main
from fmpp.core import configuration_from_json


def write_cfg(tmp_path: Path, cfg: dict, name="cfg.json") -> str:
    p = tmp_path / name
    p.write_text(json.dumps(cfg), encoding="utf-8")
    return str(p)


BASE = {
    "window": {"lo": [0, 0], "hi": [1, 1]},
    "seed": 3,
    "replicates": 2,
    "model": {
        "ground": {"family": "poisson", "rate": 80.0},
        "aux": {"kind": "none"},
        "marks": {"model": "constant", "value": 0.02},
        "mark_grid": {"dt": 0.1},
    },
}


class TestSimulate:
    def test_deterministic_outputs(self, tmp_path):
        cfg = write_cfg(tmp_path, BASE)
        out1, out2 = tmp_path / "a", tmp_path / "b"
        assert main(["simulate", "--config", cfg, "--out", str(out1)]) == 0
        assert main(["simulate", "--config", cfg, "--out", str(out2)]) == 0
        for name in ("configuration_r000.json", "configuration_r001.json",
                     "marks_r000.csv"):
            assert (out1 / name).read_bytes() == (out2 / name).read_bytes()
        m1 = json.loads((out1 / "manifest.json").read_text())
        m2 = json.loads((out2 / "manifest.json").read_text())
        assert m1["config_hash"] == m2["config_hash"]

    def test_zero_rate_empty_points(self, tmp_path):
        cfg_obj = json.loads(json.dumps(BASE))
        cfg_obj["model"]["ground"]["rate"] = 0.0
        cfg = write_cfg(tmp_path, cfg_obj)
        out = tmp_path / "z"
        assert main(["simulate", "--config", cfg, "--out", str(out)]) == 0
        c = configuration_from_json(
            (out / "configuration_r000.json").read_text())
        assert len(c) == 0

    def test_seed_flag_overrides(self, tmp_path):
        cfg = write_cfg(tmp_path, BASE)
        out1, out2 = tmp_path / "s1", tmp_path / "s2"
        main(["simulate", "--config", cfg, "--out", str(out1), "--seed", "9"])
        main(["simulate", "--config", cfg, "--out", str(out2), "--seed", "10"])
        a = (out1 / "configuration_r000.json").read_text()
        b = (out2 / "configuration_r000.json").read_text()
        assert a != b

    def test_invalid_spec_names_field(self, tmp_path, capsys):
        bad = json.loads(json.dumps(BASE))
        del bad["model"]["ground"]["rate"]
        cfg = write_cfg(tmp_path, bad)
        assert main(["simulate", "--config", cfg, "--out",
                     str(tmp_path / "x")]) == 1
        assert "model.ground" in capsys.readouterr().err


class TestSummarize:
    def test_round_trip_growth_interaction(self, tmp_path):
        cfg_obj = {
            "window": {"lo": [0, 0], "hi": [1, 1], "t_star": 1.0},
            "seed": 1,
            "replicates": 2,
            "model": {
                "ground": {"family": "immigration-death", "arrival_rate": 10.0,
                           "death_rate": 1e-6},
                "aux": {"kind": "lifetime", "rate": 1e-6},
                "marks": {"model": "growth-interaction",
                          "growth": ["linear", 2.0, 0.08],
                          "m0": 0.0},
                "mark_grid": {"dt": 0.01},
            },
            "summarize": {"coverage": {"times": [0.2, 0.4, 0.6, 0.8],
                                       "resolution": 64}},
        }
        cfg = write_cfg(tmp_path, cfg_obj)
        out = tmp_path / "gi"
        assert main(["simulate", "--config", cfg, "--out", str(out)]) == 0
        assert main(["summarize", "--config", cfg, "--out", str(out)]) == 0
        lines = [l for l in (out / "coverage.csv").read_text().splitlines()
                 if not l.startswith("#")]
        header, rows = lines[0], lines[1:]
        assert header.split(",")[0] == "t"
        pooled = [float(r.split(",")[-1]) for r in rows]
        # radii only grow: pooled coverage is nondecreasing over time
        assert all(b >= a - 1e-12 for a, b in zip(pooled, pooled[1:]))

    def test_pcf_pooled_near_one(self, tmp_path):
        cfg_obj = json.loads(json.dumps(BASE))
        cfg_obj["model"]["ground"]["rate"] = 150.0
        cfg_obj["replicates"] = 30
        cfg_obj["summarize"] = {"pcf": {"lags": [0.05, 0.1, 0.15, 0.2]}}
        cfg = write_cfg(tmp_path, cfg_obj)
        out = tmp_path / "pcf"
        assert main(["simulate", "--config", cfg, "--out", str(out)]) == 0
        assert main(["summarize", "--config", cfg, "--out", str(out)]) == 0
        lines = [l for l in (out / "pcf.csv").read_text().splitlines()
                 if not l.startswith("#")][1:]
        pooled = np.array([float(l.split(",")[-1]) for l in lines])
        assert np.all(np.abs(pooled - 1.0) < 0.15)

    def test_missing_inputs_error(self, tmp_path, capsys):
        cfg_obj = dict(BASE, summarize={"pcf": {"lags": [0.1]}})
        cfg = write_cfg(tmp_path, cfg_obj)
        assert main(["summarize", "--config", cfg, "--out",
                     str(tmp_path / "nope")]) == 1
        assert "no configurations" in capsys.readouterr().err


class TestEstimate:
    def test_temporal_mle_closed_form(self, tmp_path):
        cfg_obj = {
            "window": {"lo": [0], "hi": [1], "t_star": 4.0},
            "seed": 2,
            "replicates": 1,
            "model": {"ground": {"family": "poisson-t", "rate": 6.0},
                      "marks": {"model": "none"},
                      "mark_grid": {"dt": 0.5}},
            "estimate": {"scheme": "mle-temporal", "budget": 600},
        }
        cfg = write_cfg(tmp_path, cfg_obj)
        out = tmp_path / "est"
        assert main(["simulate", "--config", cfg, "--out", str(out)]) == 0
        assert main(["estimate", "--config", cfg, "--out", str(out)]) == 0
        rep = json.loads((out / "fit.json").read_text())
        c = configuration_from_json((out / "configuration_r000.json").read_text())
        assert rep["converged"]
        assert rep["theta_hat"][0] == pytest.approx(len(c) / 4.0, rel=1e-6)

    def test_incompatible_scheme_exits_one(self, tmp_path, capsys):
        cfg_obj = dict(BASE, estimate={"scheme": "mle-temporal"})
        cfg = write_cfg(tmp_path, cfg_obj)
        out = tmp_path / "bad"
        main(["simulate", "--config", cfg, "--out", str(out)])
        assert main(["estimate", "--config", cfg, "--out", str(out)]) == 1
        assert "incompatible" in capsys.readouterr().err

    def test_nonconvergence_exits_three(self, tmp_path):
        cfg_obj = {
            "window": {"lo": [0], "hi": [1], "t_star": 4.0},
            "seed": 2,
            "replicates": 1,
            "model": {"ground": {"family": "poisson-t", "rate": 6.0},
                      "marks": {"model": "none"},
                      "mark_grid": {"dt": 0.5}},
            "estimate": {"scheme": "mle-temporal", "budget": 4},
        }
        cfg = write_cfg(tmp_path, cfg_obj)
        out = tmp_path / "noconv"
        main(["simulate", "--config", cfg, "--out", str(out)])
        assert main(["estimate", "--config", cfg, "--out", str(out)]) == 3

    def test_least_squares_growth_recovery(self, tmp_path):
        cfg_obj = {
            "window": {"lo": [0, 0], "hi": [1, 1], "t_star": 1.0},
            "seed": 6,
            "replicates": 1,
            "model": {
                "ground": {"family": "immigration-death", "arrival_rate": 8.0,
                           "death_rate": 1e-6},
                "aux": {"kind": "lifetime", "rate": 1e-6},
                "marks": {"model": "growth-interaction",
                          "growth": ["linear", 1.5, 0.8], "m0": 0.0,
                          "dt": 0.01},
                "mark_grid": {"dt": 0.01},
            },
            "schedule": [0.25, 0.5, 0.75],
            "estimate": {"scheme": "least-squares", "theta0": [0.5, 0.5],
                         "bounds": [[0.01, 10.0], [0.01, 10.0]],
                         "budget": 800},
        }
        cfg = write_cfg(tmp_path, cfg_obj)
        out = tmp_path / "ls"
        assert main(["simulate", "--config", cfg, "--out", str(out)]) == 0
        assert main(["estimate", "--config", cfg, "--out", str(out)]) == 0
        rep = json.loads((out / "fit.json").read_text())
        assert rep["theta_hat"][0] == pytest.approx(1.5, rel=1e-3)
        assert rep["theta_hat"][1] == pytest.approx(0.8, rel=1e-3)

    def test_pseudo_gibbs_runs(self, tmp_path):
        cfg_obj = {
            "window": {"lo": [0, 0], "hi": [1, 1]},
            "seed": 4,
            "replicates": 1,
            "model": {"ground": {"family": "gibbs", "beta": 60.0,
                                 "gamma": 0.5, "range": 0.05,
                                 "steps": 15000},
                      "marks": {"model": "none"},
                      "mark_grid": {"dt": 0.5}},
            "estimate": {"scheme": "pseudo", "budget": 400, "quad_res": 24,
                         "theta0": [40.0, 0.7]},
        }
        cfg = write_cfg(tmp_path, cfg_obj)
        out = tmp_path / "gibbs"
        assert main(["simulate", "--config", cfg, "--out", str(out)]) == 0
        code = main(["estimate", "--config", cfg, "--out", str(out)])
        rep = json.loads((out / "fit.json").read_text())
        assert code in (0, 3)
        assert len(rep["theta_hat"]) == 2


class TestReadmeExample:
    def test_readme_config_runs_end_to_end(self, tmp_path):
        cfg_obj = {
            "window": {"lo": [0, 0], "hi": [1, 1], "t_star": 1.0},
            "seed": 1,
            "replicates": 4,
            "model": {
                "ground": {"family": "immigration-death",
                           "arrival_rate": 10.0, "death_rate": 0.5},
                "aux": {"kind": "lifetime", "rate": 0.5},
                "marks": {"model": "growth-interaction",
                          "growth": ["linear", 2.0, 0.08], "m0": 0.0},
                "mark_grid": {"dt": 0.01},
            },
            "schedule": [0.25, 0.5, 0.75],
            "summarize": {"coverage": {"times": [0.2, 0.4, 0.6, 0.8],
                                       "resolution": 128}},
            "estimate": {"scheme": "least-squares", "theta0": [1.0, 0.05],
                         "bounds": [[0.01, 10], [0.001, 1]]},
        }
        cfg = write_cfg(tmp_path, cfg_obj)
        out = tmp_path / "readme"
        assert main(["simulate", "--config", cfg, "--out", str(out)]) == 0
        assert main(["summarize", "--config", cfg, "--out", str(out)]) == 0
        assert main(["estimate", "--config", cfg, "--out", str(out)]) == 0
        rep = json.loads((out / "fit.json").read_text())
        assert rep["theta_hat"][0] == pytest.approx(2.0, rel=1e-3)
        assert rep["theta_hat"][1] == pytest.approx(0.08, rel=1e-3)


class TestGeometryCommand:
    def test_section_export(self, tmp_path):
        cfg_obj = dict(BASE, geometry={"times": [0.5], "resolution": 64})
        cfg = write_cfg(tmp_path, cfg_obj)
        out = tmp_path / "geo"
        main(["simulate", "--config", cfg, "--out", str(out)])
        assert main(["geometry", "--config", cfg, "--out", str(out)]) == 0
        lines = (out / "sections.csv").read_text().splitlines()
        header = [l for l in lines if not l.startswith("#")][0]
        assert header == "replicate,t,x,y,radius"


class TestCheckCommand:
    def test_campbell_and_janossy_pass(self, tmp_path):
        cfg_obj = dict(BASE, check={"checks": ["campbell", "janossy"],
                                    "replicates": 150})
        cfg = write_cfg(tmp_path, cfg_obj)
        out = tmp_path / "chk"
        assert main(["check", "--config", cfg, "--out", str(out)]) == 0
        results = json.loads((out / "checks.json").read_text())
        assert all(r["passed"] for r in results)

    def test_corrupted_intensity_fails_gnz(self, tmp_path):
        cfg_obj = dict(BASE, check={"checks": ["gnz"], "replicates": 150,
                                    "lambda_factor": 2.0})
        cfg = write_cfg(tmp_path, cfg_obj)
        out = tmp_path / "chk2"
        assert main(["check", "--config", cfg, "--out", str(out)]) == 0
        results = json.loads((out / "checks.json").read_text())
        assert not results[0]["passed"]

    def test_honest_gnz_passes(self, tmp_path):
        cfg_obj = dict(BASE, check={"checks": ["gnz"], "replicates": 150})
        cfg = write_cfg(tmp_path, cfg_obj)
        out = tmp_path / "chk3"
        assert main(["check", "--config", cfg, "--out", str(out)]) == 0
        results = json.loads((out / "checks.json").read_text())
        assert results[0]["passed"]


class TestJanossyScheme:
    def test_mle_janossy_recovers_rate(self, tmp_path):
        cfg_obj = dict(BASE, estimate={"scheme": "mle-janossy",
                                       "theta0": [10.0], "budget": 600})
        cfg = write_cfg(tmp_path, cfg_obj)
        out = tmp_path / "jan"
        assert main(["simulate", "--config", cfg, "--out", str(out)]) == 0
        assert main(["estimate", "--config", cfg, "--out", str(out)]) == 0
        rep = json.loads((out / "fit.json").read_text())
        c = configuration_from_json((out / "configuration_r000.json").read_text())
        # maximizer of the finite-sample likelihood is n / |W|
        assert rep["theta_hat"][0] == pytest.approx(len(c), rel=1e-6)
