import csv
import os
import subprocess
import sys

import pytest

from rotortrap import cli


def _run(*argv):
    return cli.main([str(a) for a in argv])


def _manifest(path):
    with open(os.path.join(path, "manifest.txt"), encoding="utf-8") as fh:
        return dict(line.rstrip("\n").split(" = ", 1) for line in fh)


def test_simulate_pendulum_outputs(tmp_path):
    out = tmp_path / "p"
    assert _run("simulate-pendulum", "--out", out, "--set", "sim.periods=20", "--set", "sim.init=rotating") == 0
    with open(out / "pendulum_trajectory.csv", newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["t_s", "alpha_rad", "alpha_dot_rad_s"]
    assert len(rows) == 20 * 50 + 2
    m = _manifest(out)
    assert m["command"] == "simulate-pendulum" and m["seed"] == "0"
    assert m["config.sim.init"] == "rotating"
    assert "sha256.pendulum_trajectory.csv" in m and "sha256.regime.txt" in m
    assert (out / "pendulum_trajectory.csv").read_bytes().count(b"\r") == 0


def test_config_file_and_overrides(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("trap.v0_volts = 800\ntrap.freq_hz = 3000\ntrap.ell0_um = 30\ntrap.ax = -0.049\n"
                   "trap.ay = 0.054\ntrap.az = -0.005\nbody.spheroid.a_um = 4\nbody.spheroid.b_um = 15\n"
                   "body.spheroid.charges_e = 2500\ndamping.gamma0_hz = 1000\nsim.init = rotating\n"
                   "sim.periods = 200\n")
    assert _run("simulate-pendulum", "--config", cfg, "--out", tmp_path / "o", "--set", "sim.periods=10") == 0
    assert _manifest(tmp_path / "o")["config.sim.periods"] == "10"
    report = (tmp_path / "o" / "regime.txt").read_text()
    assert "RotationLockedPositive" in report


@pytest.mark.parametrize("args", [
    ["--set", "trap.v0_volts=abc"],
    ["--set", "trap.ax=0.2"],
    ["--set", "sim.init=sideways"],
    ["--jobs", "0"],
])
def test_config_errors_exit_2(tmp_path, args, capsys):
    assert _run("simulate-pendulum", "--out", tmp_path, *args) == cli.EXIT_CONFIG
    assert "configuration error" in capsys.readouterr().err


def test_bad_config_file_reports_line(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("trap.v0_volts = 800\n\nnot an assignment\n")
    assert _run("odmr", "--config", cfg, "--out", tmp_path) == cli.EXIT_CONFIG
    assert "line 3" in capsys.readouterr().err


def test_numerical_failure_exit_3(tmp_path, capsys):
    # a segment longer than the record is an InsufficientData numerical failure
    assert _run("simulate-3d", "--out", tmp_path / "s", "--set", "sim3d.periods=4") == 0
    code = _run("psd", tmp_path / "s" / "trajectory3d.csv", "--out", tmp_path / "q", "--psd-segments", "100000")
    assert code == cli.EXIT_NUMERICAL
    assert "numerical failure" in capsys.readouterr().err


def test_fit_failure_exit_4(tmp_path):
    assert _run("strobe", "--out", tmp_path / "s", "--set", "nv.rot_freq_hz=1000", "--set", "strobe.delays=2",
                "--set", "nv.b1_dir=0,0,1", "--set", "nv.b2_dir=0,0.05,1") == 0
    code = _run("fit", tmp_path / "s" / "strobe_B1.csv", tmp_path / "s" / "strobe_B2.csv", "--out", tmp_path / "f",
                "--set", "fit.n_starts=1")
    assert code == cli.EXIT_FIT


def test_strobe_fit_roundtrip(tmp_path):
    assert _run("strobe", "--out", tmp_path / "s", "--set", "nv.rot_freq_hz=1000", "--set", "strobe.delays=24") == 0
    assert (tmp_path / "s" / "strobe_B1.meta").exists()
    assert _run("fit", tmp_path / "s" / "strobe_B1.csv", tmp_path / "s" / "strobe_B2.csv",
                "--out", tmp_path / "f", "--set", "fit.n_starts=16") == 0
    rep = dict(line.split(" = ") for line in (tmp_path / "f" / "fit_report.txt").read_text().splitlines())
    axis = [float(rep[f"axis_{c}"]) for c in "xyz"]
    import numpy as np
    from rotortrap.reconstruct import axis_error

    k = np.array([0.3, -0.5, 0.81])
    assert axis_error(axis, k / np.linalg.norm(k), [1, 0, 0], [0, 1, 0]) < 1e-3
    with open(tmp_path / "f" / "fit_lines.csv", newline="") as fh:
        header = next(csv.reader(fh))
    assert header == ["field", "delay_s", "measured_hz", "fitted_hz"]


def test_missing_sidecar(tmp_path):
    (tmp_path / "m.csv").write_text("delay_s,2.8e9\n0.0,1.0\n")
    assert _run("fit", tmp_path / "m.csv", "--out", tmp_path / "f") == cli.EXIT_CONFIG


def test_jobs_env_default(tmp_path, monkeypatch):
    from rotortrap.rotor1d import default_jobs

    monkeypatch.setenv("ROTORTRAP_JOBS", "3")
    assert default_jobs() == 3
    monkeypatch.setenv("ROTORTRAP_JOBS", "junk")
    assert default_jobs() == 1


def test_console_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "rotortrap.cli", "--version"], capture_output=True, text=True)
    assert res.returncode == 0 and "rotortrap" in res.stdout
