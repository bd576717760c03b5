import json

import numpy as np
import pytest

from congestion_waves import cli
from congestion_waves.config import RunConfig, config_from_string, parse_config
from congestion_waves.errors import ConfigParseError, ConfigValidationError

SMALL = """
[grid]
xi_min = -8
xi_max = 16
n = 801

[time]
t_end = 0.2
dt = 0.01
snapshot_stride = 5

[sweep]
epsilons = 0.4, 0.2
"""


def write(tmp_path, text, name="run.ini"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def test_default_config():
    cfg = parse_config("default")
    assert cfg == RunConfig()
    assert cfg.model.epsilon == 0.1 and cfg.grid.n == 6001
    assert cfg.time.dt is None and cfg.smallness_margin == 0.5


def test_minimal_config():
    cfg = config_from_string("[model]\nepsilon = 0.2\n")
    assert cfg.model.epsilon == 0.2
    assert cfg.grid == RunConfig().grid


def test_full_sections_parse():
    cfg = config_from_string(SMALL + "[scheme]\nboundary = dirichlet\nbalanced = no\n"
                             "[outputs]\nformats = json\n[perturbation]\nsmallness_margin = none\n")
    assert cfg.scheme.boundary == "dirichlet" and cfg.scheme.balanced is False
    assert cfg.outputs.formats == ("json",)
    assert cfg.smallness_margin is None
    assert cfg.epsilons == (0.4, 0.2)


@pytest.mark.parametrize("text", [
    "[model]\ngamma = 0.5\n",
    "[model]\nu_minus = -1\n",
    "[grid]\nxi_min = 5\nxi_max = -5\n",
    "[audit]\ndelta = 1.2\n",
    "[time]\nt_end = -1\n",
    "[outputs]\nformats = xml\n",
    "[sweep]\nepsilons = 0.1, -0.2\n",
])
def test_invalid_values(text):
    with pytest.raises(ConfigValidationError):
        config_from_string(text)


def test_unknown_key_reports_line():
    with pytest.raises(ConfigValidationError, match="line 3.*epsilonn"):
        config_from_string("[model]\nepsilon = 0.1\nepsilonn = 0.2\n")


def test_unknown_section():
    with pytest.raises(ConfigValidationError, match="unknown section"):
        config_from_string("[solver]\nx = 1\n")


@pytest.mark.parametrize("text, line", [
    ("[model]\nepsilon = abc\n", 2),
    ("epsilon = 0.1\n", 1),
    ("[model]\n\n\ngamma = 2\ngamma = 3\n", 5),
])
def test_parse_errors_carry_line(text, line):
    with pytest.raises(ConfigParseError, match=f"line {line}"):
        config_from_string(text)


def run_cli(argv, capsys):
    code = cli.main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def test_profile_command(tmp_path, capsys):
    code, out, _ = run_cli(["profile", "--config", "default", "--out", str(tmp_path)], capsys)
    assert code == 0
    assert json.loads(out)["pass"] is True
    bounds = json.loads((tmp_path / "bounds.json").read_text())
    assert bounds["pass"] is True
    table = np.loadtxt(tmp_path / "profile.csv", delimiter=",", skiprows=1)
    assert table.shape == (6001, 9)
    assert np.all(table[:, 4] <= table[:, 1] + 1e-6) and np.all(table[:, 1] <= table[:, 5] + 1e-6)


def test_simulate_zero_amplitude(tmp_path, capsys):
    cfg = write(tmp_path, SMALL + "[perturbation]\namplitude = 0\n")
    code, out, _ = run_cli(["simulate", "--config", cfg, "--out", str(tmp_path / "o"), "--quiet"], capsys)
    assert code == 0 and out == ""
    decay = np.loadtxt(tmp_path / "o" / "decay.csv", delimiter=",", skiprows=1)
    assert decay.shape == (5, 5)
    # the unperturbed profile is a fixed point up to round-off
    assert np.max(np.abs(decay[:, 1:3])) < 1e-10
    assert np.max(decay[:, 3:]) < 1e-20
    summary = json.loads((tmp_path / "o" / "summary.json").read_text())
    assert summary["smallness"]["pass"] is True


def test_simulate_outputs(tmp_path, capsys):
    cfg = write(tmp_path, SMALL)
    code, out, _ = run_cli(["simulate", "--config", cfg, "--out", str(tmp_path)], capsys)
    assert code == 0
    result = json.loads(out)
    assert result["smallness"]["margin"] == pytest.approx(0.5, rel=1e-9)
    assert result["t_end"] == pytest.approx(0.2)
    snaps = np.loadtxt(tmp_path / "snapshots.csv", delimiter=",", skiprows=1)
    assert snaps.shape == (5 * 801, 6)
    energy = (tmp_path / "energy.csv").read_text().splitlines()
    assert energy[0].startswith("t,e0,e1,e2") and len(energy) == 6


def test_audit_command(tmp_path, capsys):
    cfg = write(tmp_path, "[grid]\nn = 3001\n")
    code, out, _ = run_cli(["audit", "--config", cfg, "--out", str(tmp_path)], capsys)
    assert code == 0 and json.loads(out) == {"pass": True, "reports": 10}
    ids = [r["lemma_id"] for r in json.loads((tmp_path / "audit.json").read_text())]
    assert "linear-C" in ids and "psi-derivative-2" in ids


def sweep(tmp_path, capsys, name, threads, monkeypatch):
    monkeypatch.setenv("CONGESTION_WAVES_THREADS", threads)
    cfg = write(tmp_path, SMALL)
    code, out, _ = run_cli(["sweep", "--config", cfg, "--out", str(tmp_path / name)], capsys)
    assert code == 0
    return json.loads(out), (tmp_path / name / "sweep_summary.csv").read_text()


def test_sweep_deterministic_across_workers(tmp_path, capsys, monkeypatch):
    r1, csv1 = sweep(tmp_path, capsys, "a", "1", monkeypatch)
    r2, csv2 = sweep(tmp_path, capsys, "b", "2", monkeypatch)
    assert r1 == r2 == {"points": 2, "shock_limit_monotone": True}
    assert csv1 == csv2
    rows = np.loadtxt(tmp_path / "a" / "sweep_summary.csv", delimiter=",", skiprows=1)
    assert list(rows[:, 0]) == [0.4, 0.2]
    assert rows[1, 1] < rows[0, 1]
    assert (tmp_path / "a" / "eps_0.4" / "summary.json").exists()


def test_sweep_epsilons_flag(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("CONGESTION_WAVES_THREADS", "1")
    cfg = write(tmp_path, SMALL)
    code, out, _ = run_cli(["sweep", "--config", cfg, "--out", str(tmp_path), "--epsilons", "0.3"], capsys)
    assert code == 0 and json.loads(out)["points"] == 1


def test_bad_thread_cap(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("CONGESTION_WAVES_THREADS", "many")
    code, _, err = run_cli(["sweep", "--config", write(tmp_path, SMALL), "--out", str(tmp_path)], capsys)
    assert code == 2 and json.loads(err)["exit_code"] == 2


@pytest.mark.parametrize("argv_tail", [["--epsilons", "0.1,-1"], ["--epsilons", "x"]])
def test_bad_epsilons_flag(tmp_path, capsys, argv_tail):
    code, _, err = run_cli(["sweep", "--out", str(tmp_path)] + argv_tail, capsys)
    assert code == 2


def test_exit_code_validation(tmp_path, capsys):
    code, out, err = run_cli(["profile", "--config", write(tmp_path, "[model]\ngamma = 0.5\n")], capsys)
    assert code == 2 and out == ""
    payload = json.loads(err)
    assert payload["exit_code"] == 2 and "gamma" in payload["message"]


def test_exit_code_missing_file(tmp_path, capsys):
    code, _, err = run_cli(["profile", "--config", str(tmp_path / "nope.ini")], capsys)
    assert code == 4 and json.loads(err)["error"] == "io-error"


def test_exit_code_unwritable_output(tmp_path, capsys):
    blocker = tmp_path / "file"
    blocker.write_text("")
    code, _, _ = run_cli(["profile", "--out", str(blocker / "sub")], capsys)
    assert code == 4


def test_exit_code_numerical(tmp_path, capsys, monkeypatch):
    from congestion_waves.errors import CongestionError

    def boom(*a, **k):
        raise CongestionError("v reached 1")

    monkeypatch.setattr(cli, "run", boom)
    code, _, err = run_cli(["simulate", "--config", write(tmp_path, SMALL), "--out", str(tmp_path)], capsys)
    assert code == 3 and json.loads(err)["exit_code"] == 3


def test_module_entry_point():
    import subprocess
    import sys

    proc = subprocess.run([sys.executable, "-m", "congestion_waves", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0 and "simulate" in proc.stdout
