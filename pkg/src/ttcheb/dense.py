"""
Dense full-grid reference propagators for small systems.

These operate on plain ``numpy`` arrays in the index order of
``TensorTrain.full`` and use ``numpy.fft`` for the kinetic energy, so they
share no numerical kernels with the low-rank code except the Bessel table.
"""

from __future__ import annotations

import math

import numpy as np

from .hamiltonian import HamiltonianSpec, SpectralBounds, spectral_bounds
from .propagators import bessel_j_sequence

MAX_DIM = 3
MAX_DIAG_DIM = 2
MAX_POINTS = 2**18
METHODS = ("chebyshev", "clenshaw", "soft", "diagonalize")


def _guard(spec: HamiltonianSpec, limit: int):
    if spec.grid is None:
        raise ValueError("dense references need a grid")
    if spec.d > limit:
        raise ValueError(f"dense reference limited to d <= {limit}, got d = {spec.d}")
    if math.prod(spec.grid.n) > MAX_POINTS:
        raise MemoryError(f"grid of {math.prod(spec.grid.n)} points exceeds the dense limit")


def dense_mesh(spec: HamiltonianSpec) -> np.ndarray:
    """Coordinates with shape ``grid.n + (d,)``."""
    g = spec.grid
    axes = [g.nodes(j) for j in range(g.d)]
    return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)


def dense_potential(spec: HamiltonianSpec) -> np.ndarray:
    return spec.potential(dense_mesh(spec))


def dense_kinetic_diagonal(spec: HamiltonianSpec) -> np.ndarray:
    """``|p|^2 / 2m`` on the momentum mesh in ``numpy.fft`` order."""
    g = spec.grid
    axes = [2 * np.pi * np.fft.fftfreq(g.n[j], d=g.dx[j]) for j in range(g.d)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return sum(p**2 for p in mesh) / (2 * spec.mass)


def dense_apply_h(psi: np.ndarray, v: np.ndarray, k2: np.ndarray) -> np.ndarray:
    return np.fft.ifftn(k2 * np.fft.fftn(psi)) + v * psi


def dense_hamiltonian(spec: HamiltonianSpec) -> np.ndarray:
    """Full Hermitian matrix with the spectral kinetic operator."""
    _guard(spec, MAX_DIAG_DIM)
    g = spec.grid
    dims = list(g.n)
    total = math.prod(dims)
    h = np.diag(dense_potential(spec).ravel()).astype(np.complex128)
    for j in range(g.d):
        n = dims[j]
        k2 = (2 * np.pi * np.fft.fftfreq(n, d=g.dx[j])) ** 2 / (2 * spec.mass)
        kj = np.fft.ifft(k2[:, None] * np.fft.fft(np.eye(n), axis=0), axis=0)
        left = np.eye(math.prod(dims[:j]))
        right = np.eye(math.prod(dims[j + 1 :]))
        h += np.kron(np.kron(left, kj), right)
    assert h.shape == (total, total)
    return 0.5 * (h + h.conj().T)


def dense_chebyshev_terms(psi0, spec, bounds, n_poly):
    """``T_k(H0) psi0`` for ``k < n_poly`` on the dense grid."""
    v = dense_potential(spec)
    k2 = dense_kinetic_diagonal(spec)

    def h0(x):
        return (dense_apply_h(x, v, k2) - bounds.center * x) / bounds.half_width

    terms = [psi0.astype(np.complex128)]
    if n_poly > 1:
        terms.append(h0(terms[0]))
    for _ in range(2, n_poly):
        terms.append(2 * h0(terms[-1]) - terms[-2])
    return terms


def fullgrid_reference(
    psi0: np.ndarray,
    spec: HamiltonianSpec,
    method: str,
    t: float | None = None,
    n_poly: int | None = None,
    dt: float | None = None,
    steps: int | None = None,
    bounds: SpectralBounds | None = None,
) -> np.ndarray:
    """
    Propagate a dense grid state.

    Parameters
    ----------
    psi0 : ndarray
        State with shape ``spec.grid.n``.
    method : {"chebyshev", "clenshaw", "soft", "diagonalize"}
        The Chebyshev methods need ``t`` and ``n_poly``, the split-operator
        method needs ``dt`` and ``steps``, diagonalization needs ``t``.
    """
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")
    _guard(spec, MAX_DIAG_DIM if method == "diagonalize" else MAX_DIM)
    psi0 = np.asarray(psi0, dtype=np.complex128)
    if psi0.shape != tuple(spec.grid.n):
        raise ValueError(f"state shape {psi0.shape} does not match the grid {spec.grid.n}")

    if method == "diagonalize":
        w, u = np.linalg.eigh(dense_hamiltonian(spec))
        c = u.conj().T @ psi0.ravel()
        return (u @ (np.exp(-1j * w * t) * c)).reshape(psi0.shape)

    if method == "soft":
        v = dense_potential(spec)
        half = np.exp(-0.5j * dt * v)
        kin = np.exp(-1j * dt * dense_kinetic_diagonal(spec))
        psi = psi0
        for _ in range(steps):
            psi = half * np.fft.ifftn(kin * np.fft.fftn(half * psi))
        return psi

    bounds = spectral_bounds(spec, "tt") if bounds is None else bounds
    jv = bessel_j_sequence(n_poly, bounds.t_minus(t)).values
    c = (-1j) ** np.arange(n_poly) * jv
    phase = np.exp(-1j * bounds.t_plus(t))
    if method == "chebyshev":
        terms = dense_chebyshev_terms(psi0, spec, bounds, n_poly)
        out = sum((1 if k == 0 else 2) * c[k] * terms[k] for k in range(n_poly))
        return phase * out

    v = dense_potential(spec)
    k2 = dense_kinetic_diagonal(spec)

    def h0(x):
        return (dense_apply_h(x, v, k2) - bounds.center * x) / bounds.half_width

    b1 = np.zeros_like(psi0)
    b2 = np.zeros_like(psi0)
    for r in range(n_poly - 1, -1, -1):
        b0 = 2 * h0(b1) - b2 + c[r] * psi0
        if r > 0:
            b1, b2 = b0, b1
    return phase * (b0 - b2)
