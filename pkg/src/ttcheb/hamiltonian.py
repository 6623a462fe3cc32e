"""
Model Hamiltonians, spectral bounds and the rescaled operator.

Both models are sums of one-body terms plus an optional nearest-neighbour
coupling ``c * sum_{j>=1} x_j x_{j-1}``:

* ``dna``: ``f(x) = alpha * (0.429 x - 1.126 x^2 - 0.143 x^3 + 0.563 x^4)``
  with ``c = alpha * beta``;
* ``harmonic``: ``f(x) = m omega^2 x^2 / 2`` with no coupling.

On a grid (tensor-train path) the kinetic energy is the spectral ``p^2/2m``
multiplier applied through the FFT. On a Legendre basis (function-train path)
it is the Laplacian.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np
from numpy.polynomial import polynomial as nppoly

from . import fft as _fft
from .function_train import (
    Basis,
    FunctionTrain,
    basis_galerkin_matrix,
    basis_project_function,
    basis_stiffness_matrix,
    ft_laplacian,
)
from .tensor_train import (
    DEFAULT_RMAX,
    DEFAULT_TOL,
    GridSpec,
    TensorTrain,
    tt_add,
    tt_fft,
    tt_mode_apply,
    tt_round,
    tt_scale,
    tt_sum_nn,
)

DNA_COEFFS = (0.0, 0.429, -1.126, -0.143, 0.563)
MODELS = ("dna", "harmonic")


@dataclass(frozen=True)
class HamiltonianSpec:
    """
    Parameters of ``H = -(1/2m) Laplacian + V``.

    Attributes
    ----------
    mass : float
        Particle mass in atomic units.
    model : {"dna", "harmonic"}
    alpha : float
        Overall scale of the DNA potential.
    beta : float
        Dimensionless DNA hydrogen-bond coupling; the bilinear coefficient is
        ``alpha * beta``.
    omega : float
        Harmonic frequency.
    grid : GridSpec, optional
        Position grid for tensor-train states.
    bases : tuple of Basis, optional
        Legendre bases for function-train states.
    """

    mass: float = 1.0
    model: str = "dna"
    alpha: float = 0.1
    beta: float = 0.0
    omega: float = 1.0
    grid: GridSpec | None = None
    bases: tuple[Basis, ...] | None = None

    def __post_init__(self):
        if self.model not in MODELS:
            raise ValueError(f"unsupported model {self.model!r}; expected one of {MODELS}")
        if not self.mass > 0:
            raise ValueError("mass must be positive")
        if self.model == "dna" and not self.alpha > 0:
            raise ValueError("alpha must be positive for the dna model")
        if self.model == "harmonic" and not self.omega > 0:
            raise ValueError("omega must be positive for the harmonic model")
        if self.bases is not None:
            object.__setattr__(self, "bases", tuple(self.bases))
        if self.grid is None and self.bases is None:
            raise ValueError("need a grid, a set of bases, or both")
        if self.grid is not None and self.bases is not None and self.grid.d != len(self.bases):
            raise ValueError("grid and bases disagree on the dimension")

    @property
    def d(self) -> int:
        return self.grid.d if self.grid is not None else len(self.bases)

    @property
    def coupling(self) -> float:
        return self.alpha * self.beta if self.model == "dna" else 0.0

    def onebody_coeffs(self) -> np.ndarray:
        """Power-series coefficients of the one-body potential ``f``."""
        if self.model == "dna":
            return self.alpha * np.array(DNA_COEFFS)
        return np.array([0.0, 0.0, 0.5 * self.mass * self.omega**2])

    def onebody(self, x):
        return nppoly.polyval(np.asarray(x, dtype=float), self.onebody_coeffs())

    def potential(self, x) -> float | np.ndarray:
        """Direct evaluation of ``V``; the last axis of ``x`` runs over dimensions."""
        x = np.asarray(x, dtype=float)
        v = np.sum(self.onebody(x), axis=-1)
        if self.coupling != 0.0 and x.shape[-1] > 1:
            v = v + self.coupling * np.sum(x[..., 1:] * x[..., :-1], axis=-1)
        return v

    def with_grid(self, grid: GridSpec) -> "HamiltonianSpec":
        return HamiltonianSpec(self.mass, self.model, self.alpha, self.beta, self.omega, grid, self.bases)

    def with_bases(self, bases: Sequence[Basis]) -> "HamiltonianSpec":
        return HamiltonianSpec(self.mass, self.model, self.alpha, self.beta, self.omega, self.grid, tuple(bases))


@dataclass(frozen=True)
class SpectralBounds:
    """Interval ``[e_min, e_max]`` containing the spectrum of ``H``."""

    e_min: float
    e_max: float

    def __post_init__(self):
        if not self.e_max > self.e_min:
            raise ValueError(f"e_max={self.e_max} must exceed e_min={self.e_min}")

    @property
    def center(self) -> float:
        return 0.5 * (self.e_max + self.e_min)

    @property
    def half_width(self) -> float:
        return 0.5 * (self.e_max - self.e_min)

    def t_plus(self, t: float) -> float:
        return t * self.center

    def t_minus(self, t: float) -> float:
        return t * self.half_width


# format helpers -----------------------------------------------------------


def state_format(psi) -> str:
    if isinstance(psi, TensorTrain):
        return "tt"
    if isinstance(psi, FunctionTrain):
        return "ft"
    raise TypeError(f"expected a TensorTrain or FunctionTrain, got {type(psi).__name__}")


def _resolve_format(spec: HamiltonianSpec, fmt: str | None) -> str:
    if fmt is None:
        fmt = "tt" if spec.grid is not None else "ft"
    if fmt == "tt" and spec.grid is None:
        raise ValueError("the tensor-train path needs a grid")
    if fmt == "ft" and spec.bases is None:
        raise ValueError("the function-train path needs bases")
    if fmt not in ("tt", "ft"):
        raise ValueError(f"unknown format {fmt!r}")
    return fmt


# potential ----------------------------------------------------------------


def build_potential(spec: HamiltonianSpec, fmt: str | None = None) -> TensorTrain | FunctionTrain:
    """
    Exact low-rank potential.

    The tensor-train result samples ``V`` on the grid. The function-train
    result expands ``V`` exactly in bases of degree 5 (dna) or 3 (harmonic)
    on the domains of ``spec.bases``.
    """
    fmt = _resolve_format(spec, fmt)
    c = spec.coupling
    if fmt == "tt":
        g = spec.grid
        xs = [g.nodes(j) for j in range(g.d)]
        return tt_sum_nn([spec.onebody(x) for x in xs], c, xs)
    p = len(spec.onebody_coeffs())
    bases = [b.with_degree(p) for b in spec.bases]
    f = [basis_project_function(b, spec.onebody, order=p + 2) for b in bases]
    x = [basis_project_function(b, lambda t: t, order=p + 2) for b in bases]
    one = [basis_project_function(b, np.ones_like, order=p + 2) for b in bases]
    return FunctionTrain(bases, tt_sum_nn(f, c, x, unit_vectors=one))


def _poly_range(coeffs, lo, hi, samples=None):
    """Extrema of a polynomial over ``[lo, hi]``, or over ``samples`` if given."""
    if samples is not None:
        v = nppoly.polyval(samples, coeffs)
        return float(v.min()), float(v.max())
    roots = nppoly.polyroots(nppoly.polyder(coeffs)) if len(coeffs) > 2 else np.array([])
    crit = [r.real for r in np.atleast_1d(roots) if abs(r.imag) < 1e-12 and lo <= r.real <= hi]
    v = nppoly.polyval(np.array([lo, hi] + crit), coeffs)
    return float(v.min()), float(v.max())


def potential_range(spec: HamiltonianSpec, fmt: str | None = None) -> tuple[float, float]:
    """Term-wise lower and upper bounds of ``V`` over the grid or the domain."""
    fmt = _resolve_format(spec, fmt)
    coeffs = spec.onebody_coeffs()
    lo = hi = 0.0
    xb = []
    for j in range(spec.d):
        if fmt == "tt":
            g = spec.grid
            nodes = g.nodes(j)
            fmin, fmax = _poly_range(coeffs, None, None, nodes)
            xb.append(float(np.max(np.abs(nodes))))
        else:
            b = spec.bases[j]
            fmin, fmax = _poly_range(coeffs, b.a, b.b)
            xb.append(max(abs(b.a), abs(b.b)))
        lo += fmin
        hi += fmax
    cross = abs(spec.coupling) * sum(xb[j] * xb[j - 1] for j in range(1, spec.d))
    return lo - cross, hi + cross


def max_kinetic(spec: HamiltonianSpec, fmt: str | None = None) -> float:
    """``pi^2/(2m) * sum_j 1/dx_j^2``; a basis of degree ``p`` counts as ``p`` points."""
    fmt = _resolve_format(spec, fmt)
    if fmt == "tt":
        dx = spec.grid.dx
    else:
        dx = np.array([b.length / b.p for b in spec.bases])
    return float(np.pi**2 / (2 * spec.mass) * np.sum(1.0 / dx**2))


def spectral_bounds(spec: HamiltonianSpec, fmt: str | None = None) -> SpectralBounds:
    """
    Closed-form bracket of the discretized spectrum.

    ``E_min = sum_j min f_j - |c| sum_j xb_j xb_{j-1}`` and
    ``E_max = sum_j max f_j + |c| sum_j xb_j xb_{j-1} + pi^2/(2m) sum_j 1/dx_j^2``
    with ``xb_j`` the largest coordinate magnitude on axis ``j``. Extrema are
    taken over grid nodes (tensor trains) or over the whole domain (function
    trains).
    """
    fmt = _resolve_format(spec, fmt)
    lo, hi = potential_range(spec, fmt)
    return SpectralBounds(lo, hi + max_kinetic(spec, fmt))


# kinetic energy -----------------------------------------------------------


def kinetic_diagonal(grid: GridSpec, j: int, mass: float) -> np.ndarray:
    return grid.momenta(j) ** 2 / (2.0 * mass)


def apply_kinetic(
    psi: TensorTrain | FunctionTrain,
    spec: HamiltonianSpec,
    tol: float = DEFAULT_TOL,
    rmax: int = DEFAULT_RMAX,
) -> TensorTrain | FunctionTrain:
    """
    Kinetic energy ``-(1/2m) Laplacian psi``.

    Tensor trains: per dimension a forward FFT, the ``p^2/2m`` diagonal and
    an inverse FFT on that mode; the ``d`` terms are summed in index order
    with rounding after each addition. Function trains: the Laplacian of the
    expansion.
    """
    fmt = state_format(psi)
    _resolve_format(spec, fmt)
    if fmt == "ft":
        return ft_laplacian(psi, spec.mass, tol, rmax)
    if psi.dims != list(spec.grid.n):
        raise ValueError(f"state dims {psi.dims} do not match the grid {spec.grid.n}")
    acc = None
    for j in range(psi.d):
        term = tt_fft(psi, j)
        term = tt_mode_apply(term, j, kinetic_diagonal(spec.grid, j, spec.mass))
        term = tt_fft(term, j, inverse=True)
        acc = term if acc is None else tt_round(tt_add(acc, term), tol, rmax)
    return acc


def kinetic_matrix(grid: GridSpec, j: int, mass: float) -> np.ndarray:
    """Dense FFT-based kinetic matrix of axis ``j``, built with the package FFT."""
    k2 = kinetic_diagonal(grid, j, mass)
    rows = _fft.ifft(_fft.fft(np.eye(grid.n[j])) * k2)
    m = rows.T
    return 0.5 * (m + m.conj().T)


def galerkin_kinetic(basis: Basis, mass: float, cap: float | None = None) -> np.ndarray:
    """
    Symmetric Galerkin kinetic matrix ``(1/2m) int phi_a' phi_b'``.

    Eigenvalues above ``cap`` are clipped to ``cap``. High-degree Legendre
    stiffness eigenvalues grow like ``p^4`` and would otherwise force far more
    expansion terms than an equivalent grid; the clipped modes are
    unresolved anyway.
    """
    k = basis_stiffness_matrix(basis) / (2.0 * mass)
    k = 0.5 * (k + k.T)
    if cap is None:
        return k
    w, v = np.linalg.eigh(k)
    return (v * np.minimum(w, cap)) @ v.T


# nearest-neighbour operators ----------------------------------------------


def _mode_product(m, core):
    if m.ndim == 1:
        return core * m[None, :, None]
    return np.matmul(m, core)


class ChainOperator:
    """
    Operator ``sum_j h_j + c * sum_{j>=1} X_j X_{j-1}`` on a chain.

    ``h_j`` and ``X_j`` act on mode ``j`` only; each is an ``(n, n)`` matrix
    or a length-``n`` diagonal. Applying it to a train of rank ``r`` gives a
    train of rank ``3r`` (``2r`` without coupling) with no intermediate sums.
    """

    def __init__(self, onsite: Sequence[np.ndarray], coupling: float = 0.0, coords=None):
        self.onsite = [np.asarray(h, dtype=np.complex128) for h in onsite]
        self.coupling = complex(coupling)
        if self.coupling != 0 and coords is None:
            raise ValueError("a coupled operator needs coordinate operators")
        self.coords = None if coords is None else [np.asarray(x, dtype=np.complex128) for x in coords]

    @property
    def d(self) -> int:
        return len(self.onsite)

    @property
    def dims(self) -> list[int]:
        return [h.shape[0] for h in self.onsite]

    def shifted_scaled(self, scale: float, shift: float) -> "ChainOperator":
        """``scale * (self - shift * I)``; the shift is split evenly over the sites."""
        d = self.d
        onsite = []
        for h in self.onsite:
            if h.ndim == 1:
                onsite.append(scale * (h - shift / d))
            else:
                onsite.append(scale * (h - (shift / d) * np.eye(h.shape[0])))
        return ChainOperator(onsite, scale * self.coupling, self.coords)

    def apply(self, a: TensorTrain) -> TensorTrain:
        """Exact, unrounded product with a train."""
        if a.dims != self.dims:
            raise ValueError(f"operator dims {self.dims} do not match state dims {a.dims}")
        d = a.d
        if d == 1:
            return TensorTrain([_mode_product(self.onsite[0], a.cores[0])], check=False)
        coupled = self.coupling != 0
        s = 3 if coupled else 2
        cores = []
        for j, core in enumerate(a.cores):
            r0, n, r1 = core.shape
            hc = _mode_product(self.onsite[j], core)
            blk = np.zeros((s, r0, n, s, r1), dtype=np.complex128)
            blk[0, :, :, 0] = core
            blk[0, :, :, s - 1] = hc
            blk[s - 1, :, :, s - 1] = core
            if coupled:
                xc = _mode_product(self.coords[j], core)
                blk[0, :, :, 1] = xc
                blk[1, :, :, 2] = self.coupling * xc
            if j == 0:
                blk = blk[:1]
            elif j == d - 1:
                blk = blk[:, :, :, s - 1 :]
            cores.append(blk.reshape(blk.shape[0] * r0, n, blk.shape[3] * r1))
        return TensorTrain(cores, check=False)

    def dense(self) -> np.ndarray:
        """Full matrix (small systems only); index order matches ``TensorTrain.full``."""
        dims = self.dims
        total = math.prod(dims)
        if total > 4096:
            raise MemoryError(f"refusing to build a {total} x {total} matrix")

        def mat(m):
            return np.diag(m) if m.ndim == 1 else m

        def embed(ops):
            out = np.ones((1, 1), dtype=np.complex128)
            for j, n in enumerate(dims):
                out = np.kron(out, ops.get(j, np.eye(n)))
            return out

        h = sum(embed({j: mat(self.onsite[j])}) for j in range(self.d))
        if self.coupling != 0:
            for j in range(1, self.d):
                h = h + self.coupling * embed({j - 1: mat(self.coords[j - 1]), j: mat(self.coords[j])})
        return h


@lru_cache(maxsize=32)
def hamiltonian_operator(spec: HamiltonianSpec, fmt: str | None = None) -> ChainOperator:
    """
    ``H`` as a chain operator.

    Grid path: FFT kinetic matrix plus the diagonal one-body potential, with
    diagonal coordinate factors. Basis path: Galerkin matrices of the
    kinetic energy (clipped at the equivalent-grid maximum), of ``f`` and of
    ``x``.
    """
    fmt = _resolve_format(spec, fmt)
    onsite, coords = [], []
    if fmt == "tt":
        g = spec.grid
        for j in range(g.d):
            x = g.nodes(j)
            onsite.append(kinetic_matrix(g, j, spec.mass) + np.diag(spec.onebody(x)))
            coords.append(x)
    else:
        for b in spec.bases:
            cap = np.pi**2 / (2 * spec.mass) * (b.p / b.length) ** 2
            kin = galerkin_kinetic(b, spec.mass, cap)
            onsite.append(kin + basis_galerkin_matrix(b, spec.onebody))
            coords.append(basis_galerkin_matrix(b, lambda t: t))
    c = spec.coupling
    return ChainOperator(onsite, c, coords if c != 0 else None)


@lru_cache(maxsize=32)
def h0_operator(spec: HamiltonianSpec, bounds: SpectralBounds, fmt: str | None = None) -> ChainOperator:
    """Rescaled ``H0 = (2/(E_max-E_min)) (H - (E_max+E_min)/2)``."""
    return hamiltonian_operator(spec, fmt).shifted_scaled(1.0 / bounds.half_width, bounds.center)


def apply_h0(
    psi: TensorTrain | FunctionTrain,
    spec: HamiltonianSpec,
    bounds: SpectralBounds,
    tol: float = DEFAULT_TOL,
    rmax: int = DEFAULT_RMAX,
) -> TensorTrain | FunctionTrain:
    """
    ``H0 psi`` rounded to ``tol``.

    The kinetic, potential and shift terms are fused into one exact
    application followed by a single rounding. For function trains the
    Galerkin form is used so that ``H0`` is Hermitian.
    """
    if not bounds.e_max > bounds.e_min:
        raise ValueError("e_max must exceed e_min")
    fmt = state_format(psi)
    op = h0_operator(spec, bounds, fmt)
    if fmt == "tt":
        return tt_round(op.apply(psi), tol, rmax)
    return FunctionTrain(psi.bases, tt_round(op.apply(psi.coeffs), tol, rmax))


def apply_hamiltonian(
    psi: TensorTrain | FunctionTrain,
    spec: HamiltonianSpec,
    tol: float = DEFAULT_TOL,
    rmax: int = DEFAULT_RMAX,
) -> TensorTrain | FunctionTrain:
    """Unscaled ``H psi`` rounded to ``tol``."""
    fmt = state_format(psi)
    op = hamiltonian_operator(spec, fmt)
    if fmt == "tt":
        return tt_round(op.apply(psi), tol, rmax)
    return FunctionTrain(psi.bases, tt_round(op.apply(psi.coeffs), tol, rmax))


def scaled(psi, s):
    """Scalar multiple of either state format."""
    if isinstance(psi, FunctionTrain):
        return FunctionTrain(psi.bases, tt_scale(psi.coeffs, s))
    return tt_scale(psi, s)
