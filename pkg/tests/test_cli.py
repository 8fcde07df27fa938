import json
import subprocess
import sys

import numpy as np
import pytest

from negmem import cli
from negmem.paths import PathBatch

GROWTH = ["--horizons", "30,60,120,240,480,960", "--n-paths", "200"]


def run(tmp_path, *args, out="out"):
    code = cli.main([*args, "-o", str(tmp_path / out)])
    return code, tmp_path / out


class TestVerify:
    def test_fgn_passes(self, tmp_path, capsys):
        code, out = run(tmp_path, "verify", "--model", "fgn", "--hurst", "0.25")
        assert code == 0
        rep = json.loads((out / "assumption_report.json").read_text())
        assert rep["pass"] is True
        assert rep["chi_fit"] == pytest.approx(-1.5, abs=0.01)
        assert "pass" in capsys.readouterr().out

    def test_positive_memory_is_config_error(self, tmp_path, capsys):
        code, _ = run(tmp_path, "verify", "--model", "fgn", "--hurst", "0.7")
        assert code == cli.EXIT_CONFIG
        assert "hurst" in capsys.readouterr().err

    def test_iid_file_fails(self, tmp_path):
        f = tmp_path / "iid.txt"
        f.write_text("1\n")
        code, out = run(tmp_path, "verify", "--model", "explicit", "--file", str(f))
        assert code == cli.EXIT_ASSUMPTION
        assert json.loads((out / "assumption_report.json").read_text())["pass"] is False

    def test_iid_compact_fails(self, tmp_path):
        f = tmp_path / "iid.txt"
        f.write_text("1\n")
        code, out = run(tmp_path, "verify", "--model", "explicit", "--file", str(f), "--compact")
        assert code == cli.EXIT_ASSUMPTION
        rep = json.loads((out / "assumption_report.json").read_text())
        assert rep["checks"]["tail_negative"] is False

    def test_explicit_negative_memory_file_passes(self, tmp_path):
        f = tmp_path / "r.txt"
        h = 0.3
        k = np.arange(0, 20_001, dtype=float)
        r = 0.5 * (np.abs(k + 1) ** (2 * h) - 2 * k ** (2 * h) + np.abs(k - 1) ** (2 * h))
        np.savetxt(f, r)
        code, out = run(tmp_path, "verify", "--model", "explicit", "--file", str(f), "--lag-max", "20000")
        assert code == 0
        assert json.loads((out / "assumption_report.json").read_text())["chi_fit"] == pytest.approx(-1.4, abs=0.01)

    def test_missing_file_is_config_error(self, tmp_path):
        code, _ = run(tmp_path, "verify", "--model", "explicit", "--file", str(tmp_path / "nope.txt"))
        assert code == cli.EXIT_CONFIG


class TestCertify:
    def test_fgn(self, tmp_path):
        code, out = run(tmp_path, "certify", "--certify-horizon", "2000")
        assert code == 0
        cert = json.loads((out / "certificate.json").read_text())
        assert cert["B1"] == pytest.approx(1.0, abs=1e-10)
        assert cert["K"] == 1 and cert["pass"] is True
        assert (out / "variance.csv").read_text().startswith("t,var_s,var_over_t2h\n")
        assert (out / "rho.csv").read_text().startswith("s,t,rho\n")

    def test_failing_model(self, tmp_path):
        f = tmp_path / "iid.txt"
        f.write_text("1\n")
        code, _ = run(tmp_path, "certify", "--model", "explicit", "--file", str(f), "--compact")
        assert code == cli.EXIT_ASSUMPTION

    def test_small_horizon_rejected(self, tmp_path):
        code, _ = run(tmp_path, "certify", "--certify-horizon", "100")
        assert code == cli.EXIT_CONFIG


class TestSample:
    def test_binary_and_csv(self, tmp_path):
        code, out = run(tmp_path, "sample", "-T", "16", "--n-paths", "5", "--seed", "3")
        assert code == 0
        b = PathBatch.load(out / "paths.bin")
        assert (b.T, b.n_paths, b.master_seed) == (16, 5, 3)
        assert (out / "paths.csv").read_text().startswith("path,t,Z,S\n")

    def test_not_embeddable(self, tmp_path):
        f = tmp_path / "r.txt"
        f.write_text("1\n-0.6\n")
        code, out = run(tmp_path, "sample", "--model", "explicit", "--file", str(f), "--compact", "-T", "8", "--n-paths", "2")
        assert code == cli.EXIT_ASSUMPTION
        assert json.loads((out / "spectrum.json").read_text())["min_eigenvalue"] < 0


class TestSettle:
    def test_hand_example(self, tmp_path):
        (tmp_path / "p.txt").write_text("0\n1\n0\n")
        (tmp_path / "f.txt").write_text("-1\n1\n")
        code, out = run(tmp_path, "settle", "--prices", str(tmp_path / "p.txt"), "--phi", str(tmp_path / "f.txt"), "--alpha", "2", "--lambda", "1")
        assert code == 0
        assert json.loads((out / "ledger.json").read_text())["terminal_cash"] == -3.0
        assert (out / "ledger.csv").read_text().splitlines()[0] == "t,S_t,phi_t,Phi_t,running_cash"

    def test_strategy_from_config(self, tmp_path):
        (tmp_path / "p.txt").write_text("0\n1\n-2\n1\n0.5\n0.5\n0.5\n")
        code, out = run(tmp_path, "settle", "--prices", str(tmp_path / "p.txt"), "--strategy", "contrarian")
        assert code == 0
        rows = (out / "ledger.csv").read_text().splitlines()[1:]
        assert [float(r.split(",")[2]) for r in rows[:4]] == [0.0, -1.0, 2.0, -1.0]

    def test_not_liquidating(self, tmp_path, capsys):
        (tmp_path / "p.txt").write_text("0\n1\n")
        (tmp_path / "f.txt").write_text("1\n0\n")
        code, _ = run(tmp_path, "settle", "--prices", str(tmp_path / "p.txt"), "--phi", str(tmp_path / "f.txt"))
        assert code == cli.EXIT_CONFIG
        assert "not liquidating" in capsys.readouterr().err

    def test_needs_prices(self, tmp_path):
        code, _ = run(tmp_path, "settle")
        assert code == cli.EXIT_CONFIG


class TestGrowth:
    def test_report_and_manifest_round_trip(self, tmp_path):
        code, out = run(tmp_path, "growth", *GROWTH)
        assert code == 0
        report = json.loads((out / "growth_report.json").read_text())
        assert report["theory_exponent"] == 1.5
        assert report["fitted_slope"] == pytest.approx(1.5, abs=0.3)
        code2 = cli.main(["growth", "--config", str(out / "manifest.ini"), "-o", str(tmp_path / "again"), "--workers", "3"])
        assert code2 == 0
        for name in ("growth_report.json", "growth.csv", "manifest.json"):
            assert (out / name).read_bytes() == (tmp_path / "again" / name).read_bytes(), name

    def test_zero_strategy(self, tmp_path):
        code, out = run(tmp_path, "growth", *GROWTH, "--strategy", "zero")
        assert code == 0
        report = json.loads((out / "growth_report.json").read_text())
        assert report["fitted_slope"] is None
        assert all(e["mean"] == 0.0 for e in report["estimates"])

    def test_heavy_friction_flagged(self, tmp_path, capsys):
        code, out = run(tmp_path, "growth", *GROWTH, "--lambda", "100")
        assert code == 0
        assert "NonPositiveMean" in capsys.readouterr().err
        report = json.loads((out / "growth_report.json").read_text())
        assert report["nonpositive_horizons"] == [30, 60, 120, 240, 480, 960]

    def test_bad_horizons(self, tmp_path):
        code, _ = run(tmp_path, "growth", "--horizons", "60,120", "--n-paths", "100")
        assert code == cli.EXIT_CONFIG


class TestLambdaSweep:
    def test_sweep(self, tmp_path):
        code, out = run(tmp_path, "lambda-sweep", "-T", "60", "--n-paths", "300", "--lambdas", "0,0.01,1000")
        assert code == 0
        rep = json.loads((out / "lambda_sweep.json").read_text())
        assert [r["lambda"] for r in rep["rows"]] == [0.0, 0.01, 1000.0]
        assert rep["rows"][-1]["mean"] < 0
        assert (out / "lambda_sweep.csv").exists()


class TestConfig:
    def test_flags_override_file(self, tmp_path):
        cfg = tmp_path / "run.ini"
        cfg.write_text("[model]\nhurst = 0.1\n[experiment]\nlag_max = 10000\n")
        code, out = run(tmp_path, "verify", "--config", str(cfg), "--hurst", "0.25")
        assert code == 0
        rep = json.loads((out / "assumption_report.json").read_text())
        assert rep["chi_fit"] == pytest.approx(-1.5, abs=0.01)
        assert rep["window"] == [10, 10000]
        manifest = (out / "manifest.ini").read_text()
        assert "hurst = 0.25" in manifest

    def test_file_values_used(self, tmp_path):
        cfg = tmp_path / "run.ini"
        cfg.write_text("[model]\nhurst = 0.1\n")
        code, out = run(tmp_path, "verify", "--config", str(cfg))
        assert code == 0
        assert json.loads((out / "assumption_report.json").read_text())["chi_fit"] == pytest.approx(-1.8, abs=0.01)

    def test_env_output_dir(self, tmp_path, monkeypatch):
        monkeypatch.setenv(cli.OUTPUT_ENV, str(tmp_path / "envdir"))
        assert cli.main(["verify"]) == 0
        assert (tmp_path / "envdir" / "assumption_report.json").exists()

    def test_bad_value(self, tmp_path):
        cfg = tmp_path / "run.ini"
        cfg.write_text("[experiment]\nn_paths = many\n")
        code, _ = run(tmp_path, "sample", "--config", str(cfg))
        assert code == cli.EXIT_CONFIG

    def test_missing_config(self, tmp_path):
        code, _ = run(tmp_path, "verify", "--config", str(tmp_path / "missing.ini"))
        assert code == cli.EXIT_CONFIG

    def test_unknown_flag(self, tmp_path):
        assert cli.main(["verify", "--frobnicate"]) == cli.EXIT_CONFIG

    def test_runtime_error(self, tmp_path, monkeypatch):
        def boom(*a, **k):
            raise RuntimeError("disk on fire")

        monkeypatch.setattr(cli, "verify_assumption", boom)
        code, _ = run(tmp_path, "verify")
        assert code == cli.EXIT_RUNTIME

    def test_manifest_json_has_provenance(self, tmp_path):
        _, out = run(tmp_path, "verify")
        doc = json.loads((out / "manifest.json").read_text())
        assert doc["command"] == "verify"
        assert "PCG64" in doc["rng_algorithm"]
        assert "workers" not in doc["config"]["experiment"]
        assert doc["config"]["model"]["hurst"] == "0.25"


def test_module_entry_point(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "negmem", "verify", "--hurst", "0.25", "-o", str(tmp_path)],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0, proc.stderr
    assert "verify: pass" in proc.stdout
