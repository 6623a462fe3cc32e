"""
Functional tensor trains over orthonormal Legendre bases.

Every univariate function inside core ``k`` is expanded in the same basis
``phi_{k,0} .. phi_{k,p_k-1}``, so a function train is a basis descriptor per
dimension plus a tensor train of expansion coefficients. Core ``k`` of the
function is ``F_k(x) = sum_l C_k[:, l, :] phi_{k,l}(x)``.

Because the bases are orthonormal on their intervals, L2 quantities of the
function equal Frobenius quantities of the coefficient train.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np
from numpy.polynomial import legendre as npleg

from .errors import FormatError
from .tensor_train import (
    DEFAULT_RMAX,
    DEFAULT_TOL,
    TensorTrain,
    _read_tt,
    tt_add,
    tt_conj,
    tt_from_rank1,
    tt_mode_apply,
    tt_norm,
    tt_round,
    tt_scale,
    tt_serialize,
)

FTC_MAGIC = b"FTC1"
PRODUCT_DEGREE_CAP = 64
TAIL_TOL = 1e-12


@lru_cache(maxsize=64)
def _gauss_legendre(order):
    return npleg.leggauss(order)


def gauss_chebyshev(order: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights for ``int_{-1}^{1} g(y) / sqrt(1 - y^2) dy``."""
    k = np.arange(order)
    nodes = np.cos((2 * k + 1) * np.pi / (2 * order))
    return nodes, np.full(order, np.pi / order)


@dataclass(frozen=True)
class Basis:
    """Orthonormal Legendre polynomials ``phi_0 .. phi_{p-1}`` on ``[a, b]``."""

    a: float
    b: float
    p: int

    def __post_init__(self):
        object.__setattr__(self, "a", float(self.a))
        object.__setattr__(self, "b", float(self.b))
        object.__setattr__(self, "p", int(self.p))
        if not self.b > self.a:
            raise ValueError(f"empty basis domain [{self.a}, {self.b}]")
        if self.p < 1:
            raise ValueError(f"basis degree must be positive, got {self.p}")

    @property
    def length(self) -> float:
        return self.b - self.a

    def with_degree(self, p: int) -> "Basis":
        return Basis(self.a, self.b, p)

    def same_domain(self, other: "Basis") -> bool:
        return self.a == other.a and self.b == other.b

    def _scale(self, p):
        return np.sqrt((2 * np.arange(p) + 1) / self.length)

    def to_reference(self, x):
        return (2 * np.asarray(x, dtype=float) - (self.a + self.b)) / self.length

    def vandermonde(self, x, p: int | None = None) -> np.ndarray:
        """Values ``phi_l(x_i)`` as an ``(len(x), p)`` matrix."""
        p = self.p if p is None else p
        t = self.to_reference(np.atleast_1d(x))
        return npleg.legvander(t, p - 1) * self._scale(p)

    def derivative_vandermonde(self, x, p: int | None = None) -> np.ndarray:
        p = self.p if p is None else p
        t = self.to_reference(np.atleast_1d(x))
        out = np.empty((t.size, p))
        eye = np.eye(p)
        for l in range(p):
            out[:, l] = npleg.legval(t, npleg.legder(eye[l]))
        return out * self._scale(p) * (2.0 / self.length)

    def quadrature(self, order: int) -> tuple[np.ndarray, np.ndarray]:
        """Gauss-Legendre nodes and weights on ``[a, b]``."""
        t, w = _gauss_legendre(order)
        half = 0.5 * self.length
        return half * t + 0.5 * (self.a + self.b), half * w

    def contains(self, x) -> bool:
        x = np.asarray(x)
        return bool(np.all((x >= self.a) & (x <= self.b)))


def basis_project(basis: Basis, samples: np.ndarray) -> np.ndarray:
    """
    Coefficients of a univariate function from its values at the
    Gauss-Legendre nodes of order ``len(samples)``.
    """
    samples = np.asarray(samples)
    order = samples.shape[0]
    if order < basis.p:
        raise ValueError(f"quadrature order {order} is below the basis degree {basis.p}")
    x, w = basis.quadrature(order)
    return basis.vandermonde(x).T @ (w * samples)


def basis_project_function(basis: Basis, func: Callable, order: int | None = None) -> np.ndarray:
    order = max(2 * basis.p, 64) if order is None else order
    x, _ = basis.quadrature(order)
    return basis_project(basis, func(x))


@lru_cache(maxsize=64)
def basis_diff_matrix(basis: Basis, order: int = 1) -> np.ndarray:
    """Matrix taking coefficients of ``g`` to coefficients of ``g^(order)``."""
    if order not in (1, 2):
        raise ValueError(f"derivative order must be 1 or 2, got {order}")
    x, w = basis.quadrature(basis.p + 1)
    d1 = (basis.vandermonde(x).T * w) @ basis.derivative_vandermonde(x)
    d1.setflags(write=False)
    if order == 1:
        return d1
    d2 = d1 @ d1
    d2.setflags(write=False)
    return d2


def basis_integrals(basis: Basis) -> np.ndarray:
    """``Gamma_l = int_a^b phi_l``; only the constant survives."""
    g = np.zeros(basis.p)
    g[0] = math.sqrt(basis.length)
    return g


def basis_galerkin_matrix(basis: Basis, func: Callable, order: int | None = None) -> np.ndarray:
    """``M[a, b] = int phi_a(x) f(x) phi_b(x) dx``."""
    order = basis.p + 8 if order is None else order
    x, w = basis.quadrature(order)
    v = basis.vandermonde(x)
    return (v.T * (w * func(x))) @ v


def basis_stiffness_matrix(basis: Basis) -> np.ndarray:
    """``K[a, b] = int phi_a'(x) phi_b'(x) dx`` (symmetric, natural boundaries)."""
    x, w = basis.quadrature(basis.p + 1)
    dv = basis.derivative_vandermonde(x)
    return (dv.T * w) @ dv


class FunctionTrain:
    """
    Function in functional tensor-train format.

    Parameters
    ----------
    bases : sequence of Basis
        One basis per dimension.
    coeffs : TensorTrain
        Coefficient train; mode ``k`` has size ``bases[k].p``.
    """

    __slots__ = ("bases", "coeffs")

    def __init__(self, bases: Sequence[Basis], coeffs: TensorTrain):
        bases = tuple(bases)
        if len(bases) != coeffs.d:
            raise ValueError(f"{len(bases)} bases for a {coeffs.d}-dimensional train")
        for k, (bas, n) in enumerate(zip(bases, coeffs.dims)):
            if bas.p != n:
                raise ValueError(f"dimension {k}: basis degree {bas.p} != mode size {n}")
        self.bases = bases
        self.coeffs = coeffs

    @property
    def d(self) -> int:
        return self.coeffs.d

    @property
    def ranks(self) -> list[int]:
        return self.coeffs.ranks

    @property
    def max_rank(self) -> int:
        return self.coeffs.max_rank

    def __call__(self, *x):
        return ft_eval(self, x)

    def __repr__(self):
        degs = [b.p for b in self.bases]
        return f"FunctionTrain(degrees={degs}, ranks={self.ranks})"


def ft_from_rank1(bases: Sequence[Basis], coeff_vectors: Sequence[np.ndarray]) -> FunctionTrain:
    return FunctionTrain(bases, tt_from_rank1(coeff_vectors))


def ft_from_functions(bases: Sequence[Basis], funcs: Sequence[Callable]) -> FunctionTrain:
    """Rank-one train of the product of univariate functions."""
    return ft_from_rank1(bases, [basis_project_function(b, f) for b, f in zip(bases, funcs)])


def ft_constant(bases: Sequence[Basis], value: complex = 1.0) -> FunctionTrain:
    vecs = []
    for k, b in enumerate(bases):
        v = np.zeros(b.p, dtype=np.complex128)
        v[0] = math.sqrt(b.length)
        vecs.append(v)
    vecs[0] = vecs[0] * value
    return ft_from_rank1(bases, vecs)


def ft_eval(f: FunctionTrain, x) -> complex | np.ndarray:
    """
    Evaluate at one point (a length-``d`` sequence) or at many points (a
    length-``d`` sequence of equally shaped arrays).
    """
    if len(x) != f.d:
        raise ValueError(f"need {f.d} coordinates, got {len(x)}")
    cols = [np.asarray(xk, dtype=float) for xk in x]
    shape = np.broadcast(*cols).shape
    cols = [np.broadcast_to(c, shape).ravel() for c in cols]
    m = cols[0].size
    v = np.ones((m, 1), dtype=np.complex128)
    for k, (bas, core) in enumerate(zip(f.bases, f.coeffs.cores)):
        if not bas.contains(cols[k]):
            raise ValueError(f"coordinate {k} lies outside [{bas.a}, {bas.b}]")
        phi = bas.vandermonde(cols[k])
        t = np.einsum("mi,ipj->mpj", v, core)
        v = np.einsum("mpj,mp->mj", t, phi)
    out = v[:, 0].reshape(shape)
    return complex(out) if out.ndim == 0 else out


def _pad_to(f: FunctionTrain, degrees: Sequence[int]) -> FunctionTrain:
    if all(b.p == p for b, p in zip(f.bases, degrees)):
        return f
    cores = []
    for c, p in zip(f.coeffs.cores, degrees):
        if c.shape[1] < p:
            pad = np.zeros((c.shape[0], p - c.shape[1], c.shape[2]), dtype=np.complex128)
            c = np.concatenate([c, pad], axis=1)
        cores.append(c)
    bases = [b.with_degree(p) for b, p in zip(f.bases, degrees)]
    return FunctionTrain(bases, TensorTrain(cores, check=False))


def _align(f: FunctionTrain, g: FunctionTrain):
    if f.d != g.d:
        raise ValueError(f"dimension mismatch: {f.d} vs {g.d}")
    for k, (bf, bg) in enumerate(zip(f.bases, g.bases)):
        if not bf.same_domain(bg):
            raise ValueError(f"dimension {k}: basis domains differ")
    degrees = [max(bf.p, bg.p) for bf, bg in zip(f.bases, g.bases)]
    return _pad_to(f, degrees), _pad_to(g, degrees)


def ft_scale(f: FunctionTrain, s: complex) -> FunctionTrain:
    return FunctionTrain(f.bases, tt_scale(f.coeffs, s))


def ft_conj(f: FunctionTrain) -> FunctionTrain:
    return FunctionTrain(f.bases, tt_conj(f.coeffs))


def ft_add(f: FunctionTrain, g: FunctionTrain) -> FunctionTrain:
    """Sum of two trains. Lower-degree expansions are zero-padded, which is
    exact for hierarchical bases."""
    f, g = _align(f, g)
    return FunctionTrain(f.bases, tt_add(f.coeffs, g.coeffs))


def ft_multiply(
    f: FunctionTrain, g: FunctionTrain, p_cap: int = PRODUCT_DEGREE_CAP, tail_tol: float = TAIL_TOL
) -> FunctionTrain:
    """
    Pointwise product with Kronecker-product cores.

    Each univariate product is projected by Gauss quadrature of order
    ``p_f + p_g`` onto ``min(p_f + p_g - 1, p_cap)`` basis functions, then
    trailing coefficients below ``tail_tol`` (relative) are dropped.
    """
    if f.d != g.d:
        raise ValueError(f"dimension mismatch: {f.d} vs {g.d}")
    bases, cores = [], []
    for k, (bf, bg) in enumerate(zip(f.bases, g.bases)):
        if not bf.same_domain(bg):
            raise ValueError(f"dimension {k}: basis domains differ")
        cf, cg = f.coeffs.cores[k], g.coeffs.cores[k]
        q = bf.p + bg.p
        p_out = min(bf.p + bg.p - 1, p_cap)
        x, w = bf.quadrature(q)
        vf = np.einsum("ilj,ql->iqj", cf, bf.vandermonde(x))
        vg = np.einsum("ilj,ql->iqj", cg, bg.vandermonde(x))
        prod = np.einsum("iqj,kql->ikqjl", vf, vg)
        r0 = cf.shape[0] * cg.shape[0]
        r1 = cf.shape[2] * cg.shape[2]
        prod = prod.reshape(r0, q, r1)
        proj = bf.vandermonde(x, p_out) * w[:, None]
        c = np.einsum("iqj,ql->ilj", prod, proj)
        mags = np.max(np.abs(c), axis=(0, 2))
        big = np.nonzero(mags > tail_tol * max(mags.max(), 1e-300))[0]
        keep = int(big[-1]) + 1 if big.size else 1
        cores.append(c[:, :keep, :])
        bases.append(bf.with_degree(keep))
    return FunctionTrain(bases, TensorTrain(cores, check=False))


def ft_diff(f: FunctionTrain, k: int, order: int = 1) -> FunctionTrain:
    """Partial derivative along dimension ``k``; only core ``k`` changes."""
    if not 0 <= k < f.d:
        raise IndexError(f"dimension {k} out of range for a {f.d}-dimensional train")
    return FunctionTrain(f.bases, tt_mode_apply(f.coeffs, k, basis_diff_matrix(f.bases[k], order)))


def ft_integrate(f: FunctionTrain) -> complex:
    """Integral over the full box as a product of integrated cores."""
    v = np.ones((1, 1), dtype=np.complex128)
    for bas, core in zip(f.bases, f.coeffs.cores):
        v = v @ np.tensordot(basis_integrals(bas), core, axes=(0, 1))
    return complex(v[0, 0])


def ft_inner(f: FunctionTrain, g: FunctionTrain) -> complex:
    """
    ``int conj(f) g`` by a running contraction over the cores.

    The bond matrix ``Y`` (ranks of ``f`` by ranks of ``g``) is pushed
    through each pair of cores; integrating a product of two univariate
    functions reduces to a sum over the shared orthonormal basis index, so
    the product train is never formed.
    """
    f, g = _align(f, g)
    y = np.ones((1, 1), dtype=np.complex128)
    for cf, cg in zip(f.coeffs.cores, g.coeffs.cores):
        t = np.einsum("alb,ac->blc", cf.conj(), y)
        y = np.einsum("blc,cld->bd", t, cg)
    return complex(y[0, 0])


def ft_norm(f: FunctionTrain) -> float:
    return tt_norm(f.coeffs)


def ft_round(f: FunctionTrain, tol: float = DEFAULT_TOL, rmax: int = DEFAULT_RMAX) -> FunctionTrain:
    return FunctionTrain(f.bases, tt_round(f.coeffs, tol, rmax))


def ft_laplacian(
    f: FunctionTrain, mass: float, tol: float = DEFAULT_TOL, rmax: int = DEFAULT_RMAX
) -> FunctionTrain:
    """``-(1/2m) * sum_k d^2 f / dx_k^2``, rounding after each accumulation."""
    if mass <= 0:
        raise ValueError("mass must be positive")
    acc = ft_diff(f, 0, 2)
    for k in range(1, f.d):
        acc = ft_round(ft_add(acc, ft_diff(f, k, 2)), tol, rmax)
    return ft_scale(acc, -0.5 / mass)


def ft_serialize(f: FunctionTrain) -> bytes:
    """FTC1 stream: magic, u32 d, per dimension (f64 a, f64 b, u64 p), then TTC1."""
    parts = [FTC_MAGIC, struct.pack("<I", f.d)]
    for b in f.bases:
        parts.append(struct.pack("<ddQ", b.a, b.b, b.p))
    parts.append(tt_serialize(f.coeffs))
    return b"".join(parts)


def ft_deserialize(data: bytes) -> FunctionTrain:
    buf = memoryview(data)
    if len(buf) < 8 or bytes(buf[:4]) != FTC_MAGIC:
        raise FormatError("bad magic, expected FTC1")
    (d,) = struct.unpack("<I", buf[4:8])
    pos = 8
    if len(buf) < pos + 24 * d:
        raise FormatError("truncated stream")
    bases = []
    for _ in range(d):
        a, b, p = struct.unpack("<ddQ", buf[pos : pos + 24])
        bases.append(Basis(a, b, p))
        pos += 24
    coeffs, end = _read_tt(buf, pos)
    if end != len(buf):
        raise FormatError(f"{len(buf) - end} trailing bytes after the train")
    try:
        return FunctionTrain(bases, coeffs)
    except ValueError as exc:
        raise FormatError(str(exc)) from exc


def save_ft(path, f: FunctionTrain) -> None:
    with open(path, "wb") as fh:
        fh.write(ft_serialize(f))


def load_ft(path) -> FunctionTrain:
    with open(path, "rb") as fh:
        return ft_deserialize(fh.read())
