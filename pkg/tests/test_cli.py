"""End-to-end CLI runs: outputs, determinism, exit codes."""

import json
import os

import pytest

from lensopt.cli import main


@pytest.fixture
def config_path(tmp_path):
    cfg = {
        "grid": {"nx": 10, "ny": 10},
        "time": {"t_final": 0.5, "time_step": 0.03125},
        "source": {"amplitude": 0.3},
        "optimizer": {"max_iterations": 2, "stationarity_tol": 1e-12},
        "output_dir": str(tmp_path / "run"),
    }
    path = tmp_path / "scn.json"
    path.write_text(json.dumps(cfg))
    return str(path)


class TestSolve:
    def test_outputs_and_exit_code(self, config_path, tmp_path):
        out = str(tmp_path / "out1")
        assert main(["solve", "--config", config_path, "--out", out]) == 0
        files = os.listdir(out)
        assert "manifest.json" in files
        assert "energy_identity.csv" in files
        assert "picard.csv" in files
        assert sum(f.startswith("u_") and f.endswith(".vtk") for f in files) == 17

    def test_deterministic_logs(self, config_path, tmp_path):
        out1, out2 = str(tmp_path / "d1"), str(tmp_path / "d2")
        assert main(["solve", "--config", config_path, "--out", out1]) == 0
        assert main(["solve", "--config", config_path, "--out", out2]) == 0
        for name in ("energy_identity.csv", "picard.csv", "manifest.json"):
            b1 = open(os.path.join(out1, name), "rb").read()
            b2 = open(os.path.join(out2, name), "rb").read()
            assert b1 == b2


class TestAdjointCmd:
    def test_snapshots_written(self, config_path, tmp_path):
        out = str(tmp_path / "adj")
        assert main(["adjoint", "--config", config_path, "--out", out]) == 0
        files = os.listdir(out)
        assert sum(f.startswith("p_") for f in files) == 17


class TestGradCheck:
    def test_table_written(self, config_path, tmp_path):
        out = str(tmp_path / "gc")
        assert main(["grad-check", "--config", config_path, "--out", out]) == 0
        from lensopt.fileio import read_log
        rows = read_log(os.path.join(out, "gradcheck.csv"))
        routes = [r["route"] for r in rows]
        assert "adjoint" in routes and "sensitivity" in routes
        assert sum(r.startswith("fd_delta") for r in routes) == 3


class TestOptimizeCmd:
    def test_history_and_fields(self, config_path, tmp_path):
        out = str(tmp_path / "opt")
        assert main(["optimize", "--config", config_path, "--out", out]) == 0
        files = os.listdir(out)
        assert {"history.csv", "phi_initial.vtk", "phi_final.vtk",
                "manifest.json"} <= set(files)


class TestGammaSweep:
    def test_single_eps(self, config_path, tmp_path):
        out = str(tmp_path / "sweep")
        assert main(["gamma-sweep", "--config", config_path, "--out", out,
                     "--eps", "0.4"]) == 0
        assert "sweep.csv" in os.listdir(out)


class TestProfileCmd:
    def test_writes_table(self, tmp_path):
        out = str(tmp_path / "prof")
        assert main(["profile", "--eps", "0.1", "--nodes", "2000",
                     "--out", out]) == 0
        from lensopt.fileio import read_log
        rows = read_log(os.path.join(out, "profile.csv"))
        assert rows[0]["rel_error"] < 0.02


class TestExitCodes:
    def test_validation_error_is_2(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text('{"time": {"t_final": 1.0, "time_step": 0.3}}')
        assert main(["solve", "--config", str(path)]) == 2

    def test_parse_error_is_2(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{invalid json")
        assert main(["solve", "--config", str(path)]) == 2

    def test_divergence_is_3(self, tmp_path):
        cfg = {
            "grid": {"nx": 8, "ny": 8},
            "time": {"t_final": 0.5, "time_step": 0.03125},
            "source": {"amplitude": 5.0},
            "medium": {"c_lens": 1.0, "c_fluid": 2.0, "b_lens": 0.005,
                       "b_fluid": 0.01, "k_lens": 20.0, "k_fluid": 60.0},
            "output_dir": str(tmp_path / "run"),
        }
        path = tmp_path / "hot.json"
        path.write_text(json.dumps(cfg))
        assert main(["solve", "--config", str(path)]) == 3
