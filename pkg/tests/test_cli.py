import subprocess
import sys

import numpy as np
import pytest

from tvesim.cli import run_cli
from tvesim.io import read_csv, read_field_dump
from tvesim.scenario import bundled


@pytest.fixture(scope="module")
def small_scenario(tmp_path_factory):
    sc = bundled("homogeneous")
    sc.name = "small"
    sc.mesh.cells = [2, 2, 2]
    sc.galerkin.k = 3
    sc.galerkin.l = 4
    sc.time.t_end = 0.5
    sc.time.samples = 6
    sc.output.field_times = [0.0, 0.25, 0.5]
    path = tmp_path_factory.mktemp("sc") / "small.yaml"
    sc.save(path)
    return path


def test_run_writes_outputs(small_scenario, tmp_path):
    out = tmp_path / "run"
    assert run_cli(["run", "--scenario", str(small_scenario), "--out", str(out), "--weak"]) == 0
    header, body = read_csv(out / "energy.csv")
    assert header == ["t", "E", "H", "dissipation", "power", "residual"]
    assert np.all(np.diff(body[:, 1]) <= 1e-14)
    assert np.all(body[:, 3] >= 0)
    names = sorted(p.name for p in out.iterdir())
    assert names == ["bounds.csv", "energy.csv", "fields_0.bin", "fields_0p25.bin", "fields_0p5.bin",
                     "report.txt", "weak_residuals.txt"]
    meta, fields = read_field_dump(out / "fields_0p5.bin")
    assert meta["k"] == 3 and meta["variant"] == "symmetric" and meta["t"] == 0.5
    assert fields["sigma"].shape == (meta["n_qp"], 6)
    report = (out / "report.txt").read_text()
    assert "max_abs_residual = " in report and "flags = none" in report


def test_runs_are_bitwise_reproducible(small_scenario, tmp_path):
    for tag in ("a", "b"):
        assert run_cli(["run", "--scenario", str(small_scenario), "--out", str(tmp_path / tag)]) == 0
    for name in ("energy.csv", "bounds.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_nonlinear_run_is_flagged(small_scenario, tmp_path):
    assert run_cli(["run", "--scenario", str(small_scenario), "--variant", "nonlinear",
                    "--out", str(tmp_path)]) == 0
    assert "flags = no-theory" in (tmp_path / "report.txt").read_text()


def test_check_constitutive(tmp_path, capsys):
    assert run_cli(["check-constitutive", "--p", "3", "--samples", "2000", "--out", str(tmp_path)]) == 0
    assert "violations = 0" in capsys.readouterr().out
    assert (tmp_path / "constitutive.txt").exists()


def test_invalid_exponent_exits_two(small_scenario, tmp_path):
    assert run_cli(["run", "--scenario", str(small_scenario), "--p", "1.5", "--out", str(tmp_path)]) == 2
    assert run_cli(["check-constitutive", "--p", "1.5"]) == 2


def test_unknown_flag_prints_usage():
    proc = subprocess.run([sys.executable, "-m", "tvesim.cli", "run", "--bogus"], capture_output=True, text=True)
    assert proc.returncode == 2
    assert "usage:" in proc.stderr


def test_missing_scenario_file(tmp_path):
    assert run_cli(["run", "--scenario", str(tmp_path / "none.yaml")]) == 2


def test_runtime_failure_exits_one(small_scenario, tmp_path):
    sc_text = small_scenario.read_text().replace("h_min: 1.0e-12", "h_min: 10.0")
    path = tmp_path / "stiff.yaml"
    path.write_text(sc_text)
    assert run_cli(["run", "--scenario", str(path), "--out", str(tmp_path)]) == 1


def test_basis_command(small_scenario, tmp_path):
    assert run_cli(["basis", "--scenario", str(small_scenario), "--out", str(tmp_path)]) == 0
    text = (tmp_path / "basis_report.txt").read_text()
    assert "comp_gram_error" in text
    assert (tmp_path / "bases.bin").exists()


def test_compare_variants_command(small_scenario, tmp_path, capsys):
    assert run_cli(["compare-variants", "--scenario", str(small_scenario), "--out", str(tmp_path)]) == 0
    assert "ratio = " in capsys.readouterr().out
    assert run_cli(["compare-variants", "--scenario", "loaded", "--out", str(tmp_path)]) == 2


def test_mms_constant_command(tmp_path):
    assert run_cli(["mms", "--case", "constant", "--out", str(tmp_path)]) == 0
    header, body = read_csv(tmp_path / "mms_constant.csv")
    assert body.shape[0] == 1
