import numpy as np
import pytest

from ttcheb import runner
from ttcheb.config import apply_overrides, parse_config
from ttcheb.hamiltonian import SpectralBounds
from ttcheb.errors import DivergenceError
from ttcheb.models import l2_error
from ttcheb.runner import (
    CONVERGENCE_HEADER,
    SOFT_HEADER,
    SURVIVAL_HEADER,
    read_csv,
    run_convergence_study,
    run_simulation,
    run_soft_comparison,
)

HARMONIC = """
model = harmonic
dim = 2
x_min = -7
x_max = 7
t_final = 0.1
tau = 0.01
n_poly = 40
round_tol = 1e-12
checkpoint_every = 3
slice_times = 0.0, 0.05
"""


def cfg(extra=""):
    return parse_config(apply_overrides(HARMONIC, [line for line in extra.splitlines() if line.strip()]))


def header(path):
    return path.read_text().splitlines()[0].split(",")


def test_run_writes_survival(tmp_path):
    res = run_simulation(cfg(), out=tmp_path)
    path = tmp_path / "survival.csv"
    assert tuple(header(path)) == SURVIVAL_HEADER
    rows = read_csv(path)
    assert len(rows) == 11
    assert abs(rows[0]["abs_s"] - 1) <= 1e-6
    assert rows[-1]["t_au"] == pytest.approx(0.1)
    assert all(abs(r["norm"] - 1) <= 1e-6 for r in rows)
    assert (tmp_path / "state.ttc").exists() and (tmp_path / "state.ttc.step").read_text().strip() == "10"
    assert (tmp_path / "slice_t0.000000.csv").exists() and (tmp_path / "slice_t0.050000.csv").exists()
    slice_rows = read_csv(tmp_path / "slice_t0.050000.csv")
    assert len(slice_rows) == 32 * 32
    assert res.report.max_rank >= 1


def test_rerun_is_byte_identical(tmp_path):
    run_simulation(cfg(), out=tmp_path / "a")
    run_simulation(cfg(), out=tmp_path / "b")
    for name in ("survival.csv", "slice_t0.050000.csv", "state.ttc"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


class Stop(Exception):
    pass


def test_resume_matches_uninterrupted(tmp_path):
    full = run_simulation(cfg(), out=tmp_path / "full")

    def interrupt(row):
        if row[0] > 0.07 + 1e-12:
            raise Stop

    with pytest.raises(Stop):
        run_simulation(cfg(), out=tmp_path / "cut", progress=interrupt)
    assert (tmp_path / "cut" / "state.ttc.step").read_text().strip() == "6"
    resumed = run_simulation(cfg(), out=tmp_path / "cut", resume=True)
    assert resumed.resumed_from == 6
    grid = cfg().grid()
    assert l2_error(resumed.state, full.state, grid.volume) <= 1e-8
    a = read_csv(tmp_path / "full" / "survival.csv")
    b = read_csv(tmp_path / "cut" / "survival.csv")
    assert len(a) == len(b)
    assert max(abs(x["re_s"] - y["re_s"]) for x, y in zip(a, b)) <= 1e-8


def test_function_train_run(tmp_path):
    res = run_simulation(cfg("format = ft\ndegree = 32\nslice_times =\n"), out=tmp_path)
    rows = read_csv(tmp_path / "survival.csv")
    assert (tmp_path / "state.ftc").exists()
    assert abs(rows[-1]["norm"] - 1) <= 1e-6
    assert res.state.d == 2


def test_soft_run(tmp_path):
    run_simulation(cfg("scheme = soft\ndt = 0.005\nslice_times =\n"), out=tmp_path)
    rows = read_csv(tmp_path / "survival.csv")
    assert len(rows) == 11 and abs(rows[-1]["norm"] - 1) <= 1e-8


def test_tt_and_ft_runs_agree(tmp_path):
    base = "model = dna\nbeta = -2\nx_min = -5\nx_max = 5\nround_tol = 1e-10\nslice_times =\n"
    run_simulation(cfg(base), out=tmp_path / "tt")
    run_simulation(cfg(base + "format = ft\n"), out=tmp_path / "ft")
    a = read_csv(tmp_path / "tt" / "survival.csv")
    b = read_csv(tmp_path / "ft" / "survival.csv")
    gap = max(abs(complex(x["re_s"], x["im_s"]) - complex(y["re_s"], y["im_s"])) for x, y in zip(a, b))
    assert gap <= 1e-3


def test_divergence_is_reported(tmp_path, monkeypatch):
    monkeypatch.setattr(runner, "spectral_bounds", lambda spec, fmt: SpectralBounds(0.0, 1.0))
    with pytest.raises(DivergenceError):
        run_simulation(cfg("t_final = 2\ntau = 2\nslice_times =\n"), out=tmp_path)


def test_convergence_study(tmp_path):
    c = cfg("n_list = 20, 40, 60, 120\nt_list = 1.0")
    rows = run_convergence_study(c, out=tmp_path)
    assert tuple(header(tmp_path / "convergence.csv")) == CONVERGENCE_HEADER
    errs = [r[2] for r in rows]
    assert errs[-1] <= 1e-6
    assert errs[-1] <= errs[-2] <= errs[0]
    assert rows == run_convergence_study(c, jobs=2)


def test_convergence_needs_harmonic():
    with pytest.raises(ValueError):
        run_convergence_study(cfg("model = dna"))


def test_soft_comparison(tmp_path):
    c = cfg("t_final = 2\ntau = 2\nn_poly = 200\ndt_list = 2, 1, 0.5")
    rows = run_soft_comparison(c, out=tmp_path)
    assert tuple(header(tmp_path / "soft_compare.csv")) == SOFT_HEADER
    assert [r[0] for r in rows] == [2.0, 1.0, 0.5]
    ttc, soft = np.array([r[1] for r in rows]), np.array([r[2] for r in rows])
    assert np.all(ttc < 1e-6) and np.all(soft > 1e-3)
    assert soft[0] > soft[-1]
    with pytest.raises(ValueError):
        run_soft_comparison(c, dt_list=[0.3])
