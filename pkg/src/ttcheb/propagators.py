"""
Time propagation of tensor-train and function-train states.

The Chebyshev propagator expands

    exp(-i t H) = exp(-i t+) sum_k (2 - delta_k0) (-i)^k J_k(t-) T_k(H0)

with ``H0`` the Hamiltonian mapped onto ``[-1, 1]`` and
``t+- = t (E_max +- E_min) / 2``. The series is summed either with the
three-term recurrence for ``T_k(H0) psi0`` or with Clenshaw's backward
recurrence. A Strang-split Fourier propagator serves as a short-time
baseline.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DivergenceError
from .function_train import FunctionTrain
from .hamiltonian import (
    HamiltonianSpec,
    SpectralBounds,
    build_potential,
    h0_operator,
    kinetic_diagonal,
    potential_range,
    spectral_bounds,
    state_format,
)
from .tensor_train import (
    DEFAULT_RMAX,
    DEFAULT_TOL,
    TensorTrain,
    tt_fft,
    tt_from_rank1,
    tt_hadamard,
    tt_hadamard_exp,
    tt_lincomb,
    tt_mode_apply,
    tt_norm,
    tt_round,
    tt_scale,
)

SCHEMES = ("recurrence", "clenshaw")
TRIM_THRESHOLD = 1e-16
TRIM_RUN = 5
DRIFT_LIMIT = 0.5
SMALL_ARGUMENT = 1e-6


# Bessel coefficients --------------------------------------------------------


@dataclass(frozen=True)
class BesselTable:
    """Values ``J_0(x) .. J_{n-1}(x)``."""

    x: float
    values: np.ndarray

    @property
    def n(self) -> int:
        return self.values.size

    def coefficients(self) -> np.ndarray:
        """Clenshaw weights ``(-i)^k J_k(x)``."""
        return (-1j) ** np.arange(self.n) * self.values


def miller_start_order(n: int, x: float) -> int:
    """
    Starting order of the downward recurrence.

    A fixed margin of 50 above ``max(n, x)`` loses accuracy for large
    arguments because the transition region of ``J_k(x)`` has width of order
    ``x^(1/3)``; the extra ``10 x^(1/3)`` keeps the error at round-off for
    ``x`` up to several thousand.
    """
    return max(n, math.ceil(x)) + 50 + math.ceil(10.0 * x ** (1.0 / 3.0))


def _bessel_small(n, x):
    """Two leading series terms ``(x/2)^k/k! (1 - (x/2)^2/(k+1))``; exact to round-off for tiny ``x``."""
    half = 0.5 * x
    vals = np.zeros(n)
    term = 1.0
    for k in range(n):
        if k:
            term *= half / k
        if term == 0.0:
            break
        vals[k] = term * (1.0 - half * half / (k + 1))
    return vals


def bessel_j_sequence(n: int, x: float) -> BesselTable:
    """
    Bessel functions of the first kind ``J_0(x) .. J_{n-1}(x)``.

    Miller's algorithm: the recurrence ``J_{k-1} = (2k/x) J_k - J_{k+1}`` is
    run downward from an arbitrary seed at a high order and the result is
    normalized with ``J_0 + 2 sum_{k>=1} J_{2k} = 1``.
    """
    if n < 1:
        raise ValueError("need at least one order")
    if x < 0:
        raise ValueError("argument must be non-negative")
    x = float(x)
    if x < SMALL_ARGUMENT:
        return BesselTable(x, _bessel_small(n, x))
    m = miller_start_order(n, x)
    j = [0.0] * (m + 2)
    j[m] = 1.0
    for k in range(m, 0, -1):
        v = (2.0 * k / x) * j[k] - j[k + 1]
        j[k - 1] = v
        if abs(v) > 1e250:
            for i in range(k - 1, m + 1):
                j[i] *= 1e-250
    arr = np.array(j[: m + 1])
    norm = arr[0] + 2.0 * np.sum(arr[2::2])
    return BesselTable(x, arr[:n] / norm)


def trimmed_length(values: np.ndarray, threshold: float = TRIM_THRESHOLD, run: int = TRIM_RUN) -> int:
    """Number of leading terms kept once ``run`` consecutive values fall below ``threshold``."""
    small = 0
    for k, v in enumerate(np.abs(values)):
        small = small + 1 if v < threshold else 0
        if small == run:
            return max(1, k - run + 1)
    return values.size


def chebyshev_weights(bounds: SpectralBounds, t: float, n: int, auto_trim: bool = False) -> np.ndarray:
    """Series weights ``(-i)^k J_k(t-)`` (without the factor 2 for ``k > 0``)."""
    table = bessel_j_sequence(n, bounds.t_minus(t))
    c = table.coefficients()
    if auto_trim:
        c = c[: trimmed_length(table.values)]
    return c


# Chebyshev polynomials --------------------------------------------------------


def chebyshev_t(k: int, x) -> np.ndarray:
    """``T_k(x)`` by the three-term recurrence."""
    x = np.asarray(x, dtype=float)
    t0, t1 = np.ones_like(x), x
    if k == 0:
        return t0
    for _ in range(k - 1):
        t0, t1 = t1, 2 * x * t1 - t0
    return t1


def chebyshev_series(coeffs, x) -> np.ndarray:
    """``sum_k (2 - delta_k0) coeffs[k] T_k(x)`` summed term by term."""
    x = np.asarray(x)
    out = np.zeros(x.shape, dtype=np.complex128)
    for k, c in enumerate(coeffs):
        out += (1 if k == 0 else 2) * c * chebyshev_t(k, x)
    return out


# plans and reports ------------------------------------------------------------


@dataclass(frozen=True)
class ChebyshevPlan:
    """
    Parameters of one Chebyshev propagation.

    ``bounds`` defaults to the closed-form bracket of the Hamiltonian.
    ``check_drift`` raises ``DivergenceError`` when the norm moves by more
    than half; sweeps over deliberately truncated series switch it off.
    """

    t: float
    n_poly: int
    scheme: str = "clenshaw"
    round_tol: float = DEFAULT_TOL
    rmax: int = DEFAULT_RMAX
    bounds: SpectralBounds | None = None
    auto_trim: bool = False
    check_drift: bool = True

    def __post_init__(self):
        if self.n_poly < 1:
            raise ValueError("n_poly must be at least 1")
        if self.t < 0:
            raise ValueError("t must be non-negative")
        if self.round_tol < 0:
            raise ValueError("round_tol must be non-negative")
        if self.rmax < 1:
            raise ValueError("rmax must be positive")
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}; expected one of {SCHEMES}")

    def resolved_bounds(self, spec: HamiltonianSpec, fmt: str | None = None) -> SpectralBounds:
        return self.bounds if self.bounds is not None else spectral_bounds(spec, fmt)


@dataclass
class RunReport:
    """Instrumentation collected during propagation."""

    terms: list[int] = field(default_factory=list)
    ranks: list[int] = field(default_factory=list)
    max_rank: int = 1
    live_peak: int = 0
    h_applications: int = 0

    def note_rank(self, a: TensorTrain) -> None:
        r = a.max_rank
        self.ranks.append(r)
        self.max_rank = max(self.max_rank, r)

    def note_live(self, count: int) -> None:
        self.live_peak = max(self.live_peak, count)


# state helpers ----------------------------------------------------------------


def _split(psi):
    """Coefficient train and a function rebuilding a state of the same format."""
    if isinstance(psi, FunctionTrain):
        bases = psi.bases
        return psi.coeffs, lambda a: FunctionTrain(bases, a)
    state_format(psi)
    return psi, lambda a: a


def _check_drift(out: TensorTrain, start: TensorTrain) -> None:
    n0 = tt_norm(start)
    n1 = tt_norm(out)
    if not np.isfinite(n1) or abs(n1 - n0) > DRIFT_LIMIT * n0:
        raise DivergenceError(
            f"norm drifted from {n0:.6g} to {n1:.6g}; the spectral bounds probably do not bracket H"
        )


def _weights_and_op(psi0, spec, plan):
    fmt = state_format(psi0)
    bounds = plan.resolved_bounds(spec, fmt)
    weights = chebyshev_weights(bounds, plan.t, plan.n_poly, plan.auto_trim)
    return bounds, weights, h0_operator(spec, bounds, fmt)


def chebyshev_propagate_recurrence(psi0, spec: HamiltonianSpec, plan: ChebyshevPlan, report: RunReport | None = None):
    """
    Chebyshev propagation with ``T_{k+1} = 2 H0 T_k - T_{k-1}``.

    Every ``H0`` application, every new ``T_k psi0`` and every partial sum
    is rounded with ``plan.round_tol`` and ``plan.rmax``.
    """
    report = RunReport() if report is None else report
    a0, wrap = _split(psi0)
    bounds, c, op = _weights_and_op(psi0, spec, plan)
    tol, rmax = plan.round_tol, plan.rmax
    n = c.size
    report.terms.append(n)

    acc = tt_scale(a0, c[0])
    live = 2
    if n > 1:
        t_prev, t_cur = a0, tt_round(op.apply(a0), tol, rmax)
        report.h_applications += 1
        acc = tt_round(tt_lincomb([acc, t_cur], [1.0, 2 * c[1]]), tol, rmax)
        live = 3
        for k in range(2, n):
            y = tt_round(op.apply(t_cur), tol, rmax)
            report.h_applications += 1
            t_next = tt_round(tt_lincomb([y, t_prev], [2.0, -1.0]), tol, rmax)
            acc = tt_round(tt_lincomb([acc, t_next], [1.0, 2 * c[k]]), tol, rmax)
            t_prev, t_cur = t_cur, t_next
            report.note_rank(t_cur)
            live = 4
    report.note_live(live)
    out = tt_scale(acc, np.exp(-1j * bounds.t_plus(plan.t)))
    report.note_rank(out)
    if plan.check_drift:
        _check_drift(out, a0)
    return wrap(out)


def chebyshev_propagate_clenshaw(psi0, spec: HamiltonianSpec, plan: ChebyshevPlan, report: RunReport | None = None):
    """
    Chebyshev propagation with Clenshaw's backward recurrence.

    ``B_r = 2 H0 B_{r+1} - B_{r+2} + (-i)^r J_r(t-) psi0`` for
    ``r = N-1 .. 0`` with ``B_N = B_{N+1} = 0``; the result is
    ``exp(-i t+) (B_0 - B_2)``. At most three ``B`` tensors are alive.
    """
    report = RunReport() if report is None else report
    a0, wrap = _split(psi0)
    bounds, c, op = _weights_and_op(psi0, spec, plan)
    tol, rmax = plan.round_tol, plan.rmax
    n = c.size
    report.terms.append(n)

    b1 = b2 = None
    for r in range(n - 1, -1, -1):
        if b1 is None:
            b0 = tt_scale(a0, c[r])
        else:
            y = tt_round(op.apply(b1), tol, rmax)
            report.h_applications += 1
            trains, coeffs = [y, a0], [2.0, c[r]]
            if b2 is not None:
                trains.append(b2)
                coeffs.append(-1.0)
            b0 = tt_round(tt_lincomb(trains, coeffs), tol, rmax)
        report.note_live(sum(b is not None for b in (b0, b1, b2)))
        report.note_rank(b0)
        if r == 0:
            break
        b1, b2 = b0, b1
    # b0 = B_0 and, when n >= 3, b2 = B_2 at this point
    last = b2 if n >= 3 else None
    acc = b0 if last is None else tt_round(tt_lincomb([b0, last], [1.0, -1.0]), tol, rmax)
    out = tt_scale(acc, np.exp(-1j * bounds.t_plus(plan.t)))
    if plan.check_drift:
        _check_drift(out, a0)
    return wrap(out)


def chebyshev_propagate(psi0, spec: HamiltonianSpec, plan: ChebyshevPlan, report: RunReport | None = None):
    if plan.scheme == "recurrence":
        return chebyshev_propagate_recurrence(psi0, spec, plan, report)
    return chebyshev_propagate_clenshaw(psi0, spec, plan, report)


# split-operator baseline ------------------------------------------------------


def potential_phase(spec: HamiltonianSpec, dt: float, tol: float = DEFAULT_TOL, rmax: int = DEFAULT_RMAX) -> TensorTrain:
    """
    Half-step potential phase ``exp(-i dt V / 2)`` on the grid.

    Separable potentials give an exact rank-one train. Coupled ones go
    through the scaling-and-squaring exponential with the bound
    ``dt/2 * max |V|`` from the term-wise potential range.
    """
    g = spec.grid
    if g is None:
        raise ValueError("the split-operator propagator needs a grid")
    if spec.coupling == 0.0:
        return tt_from_rank1([np.exp(-0.5j * dt * spec.onebody(g.nodes(j))) for j in range(g.d)])
    lo, hi = potential_range(spec, "tt")
    bound = 0.5 * dt * max(abs(lo), abs(hi))
    if not np.isfinite(bound) or bound > 1e6:
        raise OverflowError(f"phase argument bound {bound:.3g} is too large for scaling and squaring")
    arg = tt_scale(build_potential(spec, "tt"), -0.5j * dt)
    return tt_hadamard_exp(arg, tol, rmax, bound)


def soft_propagate(
    psi0: TensorTrain,
    spec: HamiltonianSpec,
    dt: float,
    steps: int,
    tol: float = DEFAULT_TOL,
    rmax: int = DEFAULT_RMAX,
    report: RunReport | None = None,
) -> TensorTrain:
    """
    Strang-split Fourier propagation ``(e^{-iV dt/2} e^{-iT dt} e^{-iV dt/2})^steps``.

    The kinetic factor is a per-mode diagonal in momentum space, so it is
    applied between a forward and inverse FFT of each mode without changing
    ranks. States are rounded after every Hadamard product.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    if steps < 1:
        raise ValueError("steps must be at least 1")
    if not isinstance(psi0, TensorTrain):
        raise TypeError("the split-operator propagator works on tensor trains")
    report = RunReport() if report is None else report
    g = spec.grid
    phase = potential_phase(spec, dt, tol, rmax)
    kin = [np.exp(-1j * dt * kinetic_diagonal(g, j, spec.mass)) for j in range(g.d)]
    psi = psi0
    for _ in range(steps):
        psi = tt_round(tt_hadamard(phase, psi), tol, rmax)
        for j in range(g.d):
            psi = tt_fft(psi, j)
            psi = tt_mode_apply(psi, j, kin[j])
            psi = tt_fft(psi, j, inverse=True)
        psi = tt_round(tt_hadamard(phase, psi), tol, rmax)
        report.note_rank(psi)
    _check_drift(psi, psi0)
    return psi
