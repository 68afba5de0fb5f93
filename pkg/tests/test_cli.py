import json
import os
import subprocess
import sys

import pytest

from ahmass import cli


def _write(tmp_path, text, name="cfg.ini"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def _read(out, name):
    with open(os.path.join(out, name), "rb") as fh:
        return fh.read()


def test_certificate_run(tmp_path, capsys):
    out = str(tmp_path / "out")
    assert cli.run("certificate", out_dir=out) == 0
    summary = json.loads(_read(out, "summary.json"))
    assert summary["experiment"] == "certificate"
    assert summary["missing_outputs"] == []
    assert all(a["status"] == "PASS" for a in summary["assertions"])
    for name in ("certificate.csv", "plot.csv", "plot_README.md"):
        assert os.path.exists(os.path.join(out, name))
    assert "PASS" in capsys.readouterr().out


def test_certificate_deterministic(tmp_path):
    a, b = str(tmp_path / "a"), str(tmp_path / "b")
    assert cli.run("certificate", out_dir=a) == 0
    assert cli.run("certificate", out_dir=b) == 0
    for name in ("certificate.csv", "summary.json", "plot.csv"):
        assert _read(a, name) == _read(b, name)


def test_mass_run_small(tmp_path):
    cfg = _write(tmp_path, "[mass]\nradii = 50 200 1000\nnum = 800\n")
    out = str(tmp_path / "out")
    assert cli.run("mass", cfg, out) == 0
    summary = json.loads(_read(out, "summary.json"))
    assert summary["config"]["mass"]["radii"] == "50 200 1000"
    names = {a["name"] for a in summary["assertions"]}
    assert {"averaging_identity", "mass_limit"} <= names
    rows = _read(out, "mass_table.csv").decode().splitlines()
    assert rows[0].startswith("r,mass_c2,") and len(rows) == 4


def test_mass_zero(tmp_path):
    cfg = _write(tmp_path, "[mass]\nm = 0\nradii = 50 100\nnum = 400\n")
    out = str(tmp_path / "out")
    assert cli.run("mass", cfg, out) == 0
    summary = json.loads(_read(out, "summary.json"))
    assert any(a["name"] == "zero_metric_masses" and a["status"] == "PASS" for a in summary["assertions"])


def test_cutoff_zero_data(tmp_path):
    cfg = _write(tmp_path, "[cutoff]\nm = 0\nradii = 20\ntheta = 1e-3\nnum_nodes = 401\nlevels = 32\n"
                           "num = 300\nnum_times = 5\ngap_radii =\n")
    out = str(tmp_path / "out")
    assert cli.run("cutoff", cfg, out) == 0
    assert os.path.exists(os.path.join(out, "drift.csv"))


def test_bad_theta_reports_line(tmp_path, capsys):
    cfg = _write(tmp_path, "[cutoff]\ntheta = 0.5\n")
    assert cli.run("cutoff", cfg, str(tmp_path / "out")) == 2
    err = capsys.readouterr().err
    assert f"{cfg}:2:" in err and "theta" in err


@pytest.mark.parametrize("text,needle", [
    ("[mass]\nbogus = 1\n", "unknown key"),
    ("[nowhere]\nx = 1\n", "unknown section"),
    ("[mass]\nradii = 200 50\n", "strictly increasing"),
    ("[mass]\nn = three\n", "cannot parse"),
    ("[certificate]\nbeta = 0.7\n", "beta"),
    ("[run]\njobs = 0\n", "at least one job"),
    ("[flow]\nscheme = rk4\n", "choose one of"),
])
def test_config_validation(tmp_path, capsys, text, needle):
    cfg = _write(tmp_path, text)
    command = "certificate" if "certificate" in text or "run" in text else "flow" if "flow" in text else "mass"
    assert cli.run(command, cfg, str(tmp_path / "out")) == 2
    assert needle in capsys.readouterr().err


def test_missing_config_file(tmp_path, capsys):
    assert cli.run("mass", str(tmp_path / "absent.ini"), str(tmp_path / "out")) == 2
    assert "cannot read config" in capsys.readouterr().err


def test_ini_roundtrip():
    cfg = cli.load_config(None, "mass_table")
    again = cli.ExperimentConfig.from_ini(cfg.to_ini(), "mass_table")
    assert again.sections == cfg.sections


def test_failed_check_exits_one(tmp_path):
    cfg = _write(tmp_path, "[mass]\nradii = 50 200 1000\nnum = 800\ntol_average = 0\n")
    assert cli.run("mass", cfg, str(tmp_path / "out")) == 1


def test_parser_flags():
    args = cli.build_parser().parse_args(["verify", "--config", "x.ini", "--out", "d", "--jobs", "2", "--seed", "5"])
    assert (args.command, args.config, args.out, args.jobs, args.seed) == ("verify", "x.ini", "d", 2, 5)


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "ahmass", "certificate", "--out", str(tmp_path / "o")],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert proc.stdout.startswith("PASS")
