"""
Experiment orchestration: checkpointed runs and parameter sweeps.

Every table is written as CSV with a one-line header; floats use ``repr``
so reruns are byte-identical.
"""

from __future__ import annotations

import csv
import io
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .config import RunConfig
from .function_train import load_ft, save_ft
from .hamiltonian import spectral_bounds
from .models import (
    AnalyticCoherentState,
    coherent_state_tt,
    coherent_survival_amplitude,
    density_slice2d,
    initial_gaussian,
    l2_error,
    state_norm,
    survival_amplitude,
)
from .propagators import ChebyshevPlan, RunReport, chebyshev_propagate, soft_propagate
from .tensor_train import TensorTrain, load_tt, save_tt

SURVIVAL_HEADER = ("t_au", "re_s", "im_s", "abs_s", "norm", "max_rank")
CONVERGENCE_HEADER = ("t_final_au", "n_poly", "l2_error")
SOFT_HEADER = ("dt_au", "err_ttc", "err_soft", "acorr_err_ttc", "acorr_err_soft")
SLICE_HEADER = ("x_p_au", "x_q_au", "density")


def _num(v):
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def write_csv(path, header, rows) -> None:
    """Atomic CSV write: render in memory, write a sibling file, rename."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_num(v) for v in row])
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(buf.getvalue())
    os.replace(tmp, path)


def read_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        return [{k: float(v) for k, v in row.items()} for row in csv.DictReader(fh)]


# single run -------------------------------------------------------------------


@dataclass
class RunResult:
    rows: list[tuple] = field(default_factory=list)
    report: RunReport = field(default_factory=RunReport)
    state: object = None
    resumed_from: int = 0


def _volume(cfg: RunConfig) -> float:
    return cfg.grid().volume if cfg.format == "tt" else 1.0


def initial_state(cfg: RunConfig):
    spec = cfg.hamiltonian()
    where = spec.grid if cfg.format == "tt" else spec.bases
    return initial_gaussian(cfg.gaussian(), where, cfg.format)


def _step(psi, cfg: RunConfig, spec, bounds, report):
    if cfg.scheme == "soft":
        steps = int(round(cfg.tau / cfg.dt))
        return soft_propagate(psi, spec, cfg.dt, steps, cfg.round_tol, cfg.rmax, report)
    scheme = "clenshaw" if cfg.scheme == "chebyshev-clenshaw" else "recurrence"
    plan = ChebyshevPlan(cfg.tau, cfg.n_poly, scheme, cfg.round_tol, cfg.rmax, bounds, cfg.auto_trim)
    return chebyshev_propagate(psi, spec, plan, report)


def _row(t, psi0, psi, volume):
    s = survival_amplitude(psi0, psi, volume)
    return (t, s.real, s.imag, abs(s), state_norm(psi, volume), psi.max_rank)


def _state_path(out: Path, cfg: RunConfig) -> Path:
    return out / ("state.ttc" if cfg.format == "tt" else "state.ftc")


def _save_state(path: Path, psi, step: int) -> None:
    tmp = path.with_name(path.name + ".tmp")
    if isinstance(psi, TensorTrain):
        save_tt(tmp, psi)
    else:
        save_ft(tmp, psi)
    os.replace(tmp, path)
    meta = path.with_name(path.name + ".step")
    meta_tmp = meta.with_name(meta.name + ".tmp")
    meta_tmp.write_text(f"{step}\n")
    os.replace(meta_tmp, meta)


def _load_state(path: Path, fmt: str):
    meta = path.with_name(path.name + ".step")
    step = int(meta.read_text().strip())
    psi = load_tt(path) if fmt == "tt" else load_ft(path)
    return psi, step


def _write_slice(out: Path, cfg: RunConfig, psi, t: float) -> None:
    p, q = cfg.slice_dims
    grid = cfg.grid() if cfg.format == "tt" else None
    xp, xq, rho = density_slice2d(psi, (p, q), cfg.fixed_coords(), grid=grid)
    rows = [(xp[i], xq[j], rho[i, j]) for i in range(xp.size) for j in range(xq.size)]
    write_csv(out / f"slice_t{t:.6f}.csv", SLICE_HEADER, rows)


def run_simulation(cfg: RunConfig, out: str | os.PathLike | None = None, resume: bool = False, progress=None) -> RunResult:
    """
    Propagate checkpoint to checkpoint and write the run's files.

    Each interval ``tau`` is an independent propagation starting from the
    previous checkpoint state. ``survival.csv`` and the state file are
    rewritten every ``checkpoint_every`` checkpoints and at the end, so an
    interrupted run can be resumed with ``resume=True``.
    """
    out = Path(cfg.output if out is None else out)
    out.mkdir(parents=True, exist_ok=True)
    spec = cfg.hamiltonian()
    bounds = spectral_bounds(spec, cfg.format) if cfg.scheme != "soft" else None
    volume = _volume(cfg)
    psi0 = initial_state(cfg)
    result = RunResult()
    state_path = _state_path(out, cfg)
    survival_path = out / "survival.csv"

    start = 0
    psi = psi0
    if resume and state_path.exists():
        psi, start = _load_state(state_path, cfg.format)
        previous = read_csv(survival_path)[: start + 1]
        result.rows = [
            (r["t_au"], r["re_s"], r["im_s"], r["abs_s"], r["norm"], int(r["max_rank"])) for r in previous
        ]
        result.resumed_from = start
    else:
        result.rows.append(_row(0.0, psi0, psi0, volume))

    slice_steps = {int(round(t / cfg.tau)): t for t in cfg.slice_times}
    if start == 0 and 0 in slice_steps:
        _write_slice(out, cfg, psi0, 0.0)
    n = cfg.n_checkpoints
    for k in range(start + 1, n + 1):
        psi = _step(psi, cfg, spec, bounds, result.report)
        t = k * cfg.tau
        result.rows.append(_row(t, psi0, psi, volume))
        if k in slice_steps:
            _write_slice(out, cfg, psi, slice_steps[k])
        if k % cfg.checkpoint_every == 0 or k == n:
            write_csv(survival_path, SURVIVAL_HEADER, result.rows)
            _save_state(state_path, psi, k)
        if progress is not None:
            progress(result.rows[-1])
    if n == 0 or start == n:
        write_csv(survival_path, SURVIVAL_HEADER, result.rows)
        _save_state(state_path, psi, n)
    result.state = psi
    return result


# sweeps -----------------------------------------------------------------------


def _map(func, items, jobs: int):
    if jobs <= 1 or len(items) <= 1:
        return [func(it) for it in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(func, items))


def coherent_oracle(cfg: RunConfig) -> AnalyticCoherentState:
    if cfg.model != "harmonic":
        raise ValueError("the analytic oracle needs the harmonic model")
    return AnalyticCoherentState.from_gaussian(cfg.gaussian(), cfg.omega, cfg.mass)


def _convergence_point(args):
    cfg, t, n_poly = args
    spec = cfg.hamiltonian()
    grid = spec.grid
    psi0 = initial_state(cfg)
    plan = ChebyshevPlan(t, n_poly, "clenshaw", cfg.round_tol, cfg.rmax, check_drift=False)
    psi = chebyshev_propagate(psi0, spec, plan)
    exact = coherent_state_tt(coherent_oracle(cfg), t, grid)
    return (t, n_poly, l2_error(psi, exact, grid.volume))


def run_convergence_study(cfg: RunConfig, n_list=None, t_list=None, out=None, jobs: int = 1) -> list[tuple]:
    """
    L2 error against the analytic coherent state for every final time and
    term count. Each point is one propagation from ``t = 0``.
    """
    cfg = replace(cfg, format="tt")
    coherent_oracle(cfg)
    n_list = cfg.n_list if n_list is None else n_list
    t_list = cfg.t_list if t_list is None else t_list
    items = [(cfg, float(t), int(n)) for t in t_list for n in n_list]
    rows = _map(_convergence_point, items, jobs)
    if out is not None:
        Path(out).mkdir(parents=True, exist_ok=True)
        write_csv(Path(out) / "convergence.csv", CONVERGENCE_HEADER, rows)
    return rows


def _soft_point(args):
    cfg, dt = args
    spec = cfg.hamiltonian()
    grid = spec.grid
    vol = grid.volume
    cs = coherent_oracle(cfg)
    psi0 = initial_state(cfg)
    steps = int(round(cfg.t_final / dt))
    exact = coherent_state_tt(cs, cfg.t_final, grid)
    s_exact = coherent_survival_amplitude(cs, cfg.t_final)

    bounds = spectral_bounds(spec, "tt")
    plan = ChebyshevPlan(dt, cfg.n_poly, "clenshaw", cfg.round_tol, cfg.rmax, bounds, auto_trim=True)
    psi = psi0
    for _ in range(steps):
        psi = chebyshev_propagate(psi, spec, plan)
    ttc = psi
    soft = soft_propagate(psi0, spec, dt, steps, cfg.round_tol, cfg.rmax)

    def acorr(p):
        return abs(survival_amplitude(psi0, p, vol) - s_exact) / abs(s_exact)

    return (dt, l2_error(ttc, exact, vol), l2_error(soft, exact, vol), acorr(ttc), acorr(soft))


def run_soft_comparison(cfg: RunConfig, dt_list=None, out=None, jobs: int = 1) -> list[tuple]:
    """
    Chebyshev against split-operator propagation to ``t_final`` for each
    step size. Both methods take ``t_final / dt`` steps of length ``dt``;
    errors are measured at ``t_final`` against the analytic coherent state.
    """
    cfg = replace(cfg, format="tt")
    coherent_oracle(cfg)
    dt_list = cfg.dt_list if dt_list is None else dt_list
    for dt in dt_list:
        k = cfg.t_final / dt
        if abs(k - round(k)) > 1e-9 or round(k) < 1:
            raise ValueError(f"dt = {dt} does not divide t_final = {cfg.t_final}")
    rows = _map(_soft_point, [(cfg, float(dt)) for dt in dt_list], jobs)
    if out is not None:
        Path(out).mkdir(parents=True, exist_ok=True)
        write_csv(Path(out) / "soft_compare.csv", SOFT_HEADER, rows)
    return rows
