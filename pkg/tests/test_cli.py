import subprocess
import sys
from importlib import resources

import mpmath
import pytest

from ttcheb import cli, runner
from ttcheb.config import DEFAULT_TEXT, parse_config
from ttcheb.hamiltonian import SpectralBounds
from ttcheb.runner import read_csv

SMALL = [
    "--set", "model=harmonic",
    "--set", "t_final=0.05",
    "--set", "tau=0.01",
    "--set", "n_poly=40",
    "--set", "x_min=-7",
    "--set", "x_max=7",
]


def test_print_defaults(capsys):
    assert cli.main(["print-defaults"]) == 0
    out = capsys.readouterr().out
    assert out == DEFAULT_TEXT
    parse_config(out)


def test_run_command(tmp_path, capsys):
    assert cli.main(["run", "--out", str(tmp_path), "--single-thread", *SMALL]) == 0
    out = capsys.readouterr().out
    assert out.count("t=") == 5 and "survival.csv" in out
    rows = read_csv(tmp_path / "survival.csv")
    assert len(rows) == 6 and abs(rows[0]["abs_s"] - 1) <= 1e-6


def test_run_quiet_and_resume(tmp_path, capsys):
    assert cli.main(["run", "--out", str(tmp_path), "--quiet", *SMALL]) == 0
    assert cli.main(["run", "--out", str(tmp_path), "--quiet", "--resume", *SMALL]) == 0
    assert "t=" not in capsys.readouterr().out
    assert len(read_csv(tmp_path / "survival.csv")) == 6


def test_run_from_config_file(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("model = harmonic\nt_final = 0.02\ntau = 0.01\nn_poly = 30\noutput = %s\n" % (tmp_path / "o"))
    assert cli.main(["run", "--config", str(path), "--quiet"]) == 0
    assert (tmp_path / "o" / "survival.csv").exists()


def test_converge_and_soft_compare(tmp_path):
    args = ["--out", str(tmp_path), "--set", "model=harmonic", "--set", "x_min=-7", "--set", "x_max=7"]
    assert cli.main(["converge", *args, "--set", "n_list=40,80", "--set", "t_list=1", "--jobs", "2"]) == 0
    assert len(read_csv(tmp_path / "convergence.csv")) == 2
    soft = ["--set", "t_final=1", "--set", "tau=1", "--set", "n_poly=120", "--set", "dt_list=1,0.5"]
    assert cli.main(["soft-compare", *args, *soft]) == 0
    assert len(read_csv(tmp_path / "soft_compare.csv")) == 2


def test_bessel_command(tmp_path, capsys):
    assert cli.main(["bessel", "--n", "3", "--x", "1.0"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "k,j_k" and len(lines) == 4
    assert float(lines[1].split(",")[1]) == pytest.approx(float(mpmath.besselj(0, 1)), abs=1e-15)
    out = tmp_path / "j.csv"
    assert cli.main(["bessel", "--n", "5", "--x", "2.5", "--out", str(out)]) == 0
    assert len(out.read_text().splitlines()) == 6


@pytest.mark.parametrize(
    "argv",
    [
        ["run", "--set", "n=33"],
        ["run", "--set", "colour=blue"],
        ["run", "--set", "dim"],
        ["run", "--jobs", "0"],
        ["bessel", "--n", "0", "--x", "1"],
        ["converge", "--set", "model=dna"],
    ],
)
def test_config_errors_exit_2(argv, tmp_path, capsys):
    assert cli.main([*argv, "--out", str(tmp_path)] if argv[0] != "bessel" else argv) == 2
    assert "error" in capsys.readouterr().err


def test_missing_config_exits_4(tmp_path):
    assert cli.main(["run", "--config", str(tmp_path / "none.cfg")]) == 4


def test_corrupt_state_exits_4(tmp_path):
    assert cli.main(["run", "--out", str(tmp_path), "--quiet", *SMALL]) == 0
    (tmp_path / "state.ttc").write_bytes(b"garbage")
    assert cli.main(["run", "--out", str(tmp_path), "--quiet", "--resume", *SMALL]) == 4


def test_divergence_exits_3(tmp_path, monkeypatch):
    monkeypatch.setattr(runner, "spectral_bounds", lambda spec, fmt: SpectralBounds(0.0, 1.0))
    argv = ["run", "--out", str(tmp_path), "--quiet", "--set", "model=harmonic", "--set", "t_final=2", "--set", "tau=2"]
    assert cli.main(argv) == 3


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "ttcheb", "print-defaults"], capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout == DEFAULT_TEXT


def test_shipped_configs_are_packaged():
    names = {p.name for p in resources.files("ttcheb").joinpath("configs").iterdir()}
    assert {"dna50.cfg", "dna50_uncoupled.cfg", "harmonic_converge.cfg", "harmonic_soft.cfg"} <= names
