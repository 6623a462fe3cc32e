"""
Discrete tensor trains.

A d-dimensional complex array ``W[k_1, ..., k_d]`` is stored as a chain of
3-way cores ``W_j`` of shape ``(r_{j-1}, n_j, r_j)`` with ``r_0 = r_d = 1``;
an entry is the product of the selected matrices ``W_1[k_1] ... W_d[k_d]``.

All operations are pure: they return new trains and never write into the
cores of their arguments.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
import scipy.linalg

from . import fft as _fft
from .errors import FormatError

DEFAULT_TOL = 1e-10
DEFAULT_RMAX = 256

TTC_MAGIC = b"TTC1"


class TensorTrain:
    """
    Tensor train with complex double-precision cores.

    Parameters
    ----------
    cores : sequence of array_like
        Core ``k`` has shape ``(r_{k-1}, n_k, r_k)``. The boundary ranks must
        be one and neighbouring ranks must agree.
    """

    __slots__ = ("cores",)

    def __init__(self, cores: Sequence[np.ndarray], check: bool = True):
        cores = [np.asarray(c, dtype=np.complex128) for c in cores]
        if check:
            _check_cores(cores)
        self.cores = cores

    @property
    def d(self) -> int:
        return len(self.cores)

    @property
    def dims(self) -> list[int]:
        return [c.shape[1] for c in self.cores]

    @property
    def ranks(self) -> list[int]:
        return [1] + [c.shape[2] for c in self.cores]

    @property
    def max_rank(self) -> int:
        return max(self.ranks)

    def full(self) -> np.ndarray:
        """Dense array. Only sensible for small trains."""
        out = self.cores[0].reshape(self.cores[0].shape[1], -1)
        for c in self.cores[1:]:
            out = (out @ c.reshape(c.shape[0], -1)).reshape(-1, c.shape[2])
        return out.reshape(self.dims)

    def __neg__(self):
        return tt_scale(self, -1.0)

    def __add__(self, other):
        return tt_add(self, other)

    def __sub__(self, other):
        return tt_add(self, tt_scale(other, -1.0))

    def __mul__(self, s):
        return tt_scale(self, s)

    __rmul__ = __mul__

    def __repr__(self):
        return f"TensorTrain(dims={self.dims}, ranks={self.ranks})"


def _check_cores(cores):
    if len(cores) == 0:
        raise ValueError("a tensor train needs at least one core")
    for k, c in enumerate(cores):
        if c.ndim != 3:
            raise ValueError(f"core {k} has {c.ndim} axes, expected 3")
        if c.shape[1] < 1:
            raise ValueError(f"core {k} has an empty mode")
    if cores[0].shape[0] != 1 or cores[-1].shape[2] != 1:
        raise ValueError("boundary ranks must be 1")
    for k in range(1, len(cores)):
        if cores[k].shape[0] != cores[k - 1].shape[2]:
            raise ValueError(
                f"rank mismatch between cores {k - 1} and {k}: "
                f"{cores[k - 1].shape[2]} != {cores[k].shape[0]}"
            )
    for k, c in enumerate(cores):
        if not np.all(np.isfinite(c)):
            raise ValueError(f"core {k} holds non-finite values")


def _same_dims(a: TensorTrain, b: TensorTrain):
    if a.dims != b.dims:
        raise ValueError(f"dimension mismatch: {a.dims} vs {b.dims}")


@dataclass(frozen=True)
class GridSpec:
    """
    Uniform periodic position grid, one axis per dimension.

    Node ``k`` of axis ``j`` sits at ``x_min[j] + k*dx[j]`` for
    ``k = 0..n[j]-1``; the right end point is excluded.
    """

    x_min: tuple[float, ...]
    x_max: tuple[float, ...]
    n: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "x_min", tuple(float(v) for v in self.x_min))
        object.__setattr__(self, "x_max", tuple(float(v) for v in self.x_max))
        object.__setattr__(self, "n", tuple(int(v) for v in self.n))
        if not (len(self.x_min) == len(self.x_max) == len(self.n)) or not self.n:
            raise ValueError("x_min, x_max and n must be non-empty and equally long")
        for j, (lo, hi, n) in enumerate(zip(self.x_min, self.x_max, self.n)):
            if not hi > lo:
                raise ValueError(f"axis {j}: x_max must exceed x_min")
            if n < 2 or not _fft.is_power_of_two(n):
                raise ValueError(f"axis {j}: n={n} is not a power of two >= 2")

    @classmethod
    def uniform(cls, d, x_min, x_max, n):
        return cls((x_min,) * d, (x_max,) * d, (n,) * d)

    @property
    def d(self) -> int:
        return len(self.n)

    @property
    def dx(self) -> np.ndarray:
        return (np.array(self.x_max) - np.array(self.x_min)) / np.array(self.n)

    @property
    def dp(self) -> np.ndarray:
        return 2.0 * np.pi / (np.array(self.x_max) - np.array(self.x_min))

    @property
    def volume(self) -> float:
        """Volume element, the product of the grid spacings."""
        return float(np.prod(self.dx))

    def nodes(self, j: int) -> np.ndarray:
        return self.x_min[j] + np.arange(self.n[j]) * self.dx[j]

    def momenta(self, j: int) -> np.ndarray:
        """Grid momenta of axis ``j`` in natural DFT order."""
        n = self.n[j]
        k = np.arange(n)
        k = np.where(k < n // 2, k, k - n)
        return k * self.dp[j]

    def nearest_index(self, j: int, x: float) -> int:
        return int(np.argmin(np.abs(self.nodes(j) - x)))


# construction -----------------------------------------------------------


def tt_from_rank1(factors: Sequence[np.ndarray]) -> TensorTrain:
    """Rank-one train whose entries are products of the factor entries."""
    if len(factors) == 0:
        raise ValueError("need at least one factor")
    cores = []
    for j, f in enumerate(factors):
        f = np.asarray(f, dtype=np.complex128).ravel()
        if f.size == 0:
            raise ValueError(f"factor {j} is empty")
        cores.append(f.reshape(1, -1, 1))
    return TensorTrain(cores)


def tt_ones(dims: Sequence[int]) -> TensorTrain:
    return tt_from_rank1([np.ones(n) for n in dims])


def tt_zeros(dims: Sequence[int]) -> TensorTrain:
    return tt_from_rank1([np.zeros(n) for n in dims])


def tt_sum_nn(
    onebody: Sequence[np.ndarray],
    coupling: float,
    coord_vectors: Sequence[np.ndarray],
    unit_vectors: Sequence[np.ndarray] | None = None,
) -> TensorTrain:
    """
    Exact train of ``sum_j f_j(x_j) + c * sum_{j>=1} x_j x_{j-1}``.

    The bond index tracks whether nothing has been placed yet, a coordinate
    factor awaits its neighbour, or a term is complete, which gives rank 3
    (rank 2 when ``coupling == 0``).

    ``unit_vectors`` replaces the all-ones fibers; pass the expansion of the
    constant function to build the same structure in coefficient space.
    """
    d = len(onebody)
    if d == 0:
        raise ValueError("need at least one dimension")
    if len(coord_vectors) != d:
        raise ValueError("onebody and coord_vectors differ in length")
    f = [np.asarray(v, dtype=np.complex128).ravel() for v in onebody]
    x = [np.asarray(v, dtype=np.complex128).ravel() for v in coord_vectors]
    for j in range(d):
        if f[j].shape != x[j].shape:
            raise ValueError(f"axis {j}: potential and coordinate lengths differ")
    if d == 1:
        return TensorTrain([f[0].reshape(1, -1, 1)])

    coupled = coupling != 0
    r = 3 if coupled else 2
    done = r - 1
    cores = []
    for j in range(d):
        n = f[j].size
        if unit_vectors is None:
            one = np.ones(n, dtype=np.complex128)
        else:
            one = np.asarray(unit_vectors[j], dtype=np.complex128).ravel()
        core = np.zeros((r, n, r), dtype=np.complex128)
        core[0, :, 0] = one
        core[0, :, done] = f[j]
        core[done, :, done] = one
        if coupled:
            core[0, :, 1] = x[j]
            core[1, :, done] = coupling * x[j]
        if j == 0:
            core = core[:1]
        elif j == d - 1:
            core = core[:, :, done:]
        cores.append(core)
    return TensorTrain(cores)


# algebra ----------------------------------------------------------------


def tt_scale(a: TensorTrain, s: complex) -> TensorTrain:
    return TensorTrain([a.cores[0] * s] + a.cores[1:], check=False)


def tt_add(a: TensorTrain, b: TensorTrain) -> TensorTrain:
    """Block-core sum. Interior ranks add; boundary ranks stay one."""
    _same_dims(a, b)
    return tt_lincomb([a, b], [1.0, 1.0])


def tt_lincomb(trains: Sequence[TensorTrain], coeffs: Sequence[complex]) -> TensorTrain:
    """``sum_i coeffs[i] * trains[i]`` as a single block-structured train."""
    if len(trains) != len(coeffs) or not trains:
        raise ValueError("need matching, non-empty trains and coefficients")
    dims = trains[0].dims
    for t in trains[1:]:
        if t.dims != dims:
            raise ValueError(f"dimension mismatch: {dims} vs {t.dims}")
    d = len(dims)
    if d == 1:
        core = sum(c * t.cores[0] for c, t in zip(coeffs, trains))
        return TensorTrain([core], check=False)

    cores = []
    for k in range(d):
        parts = [t.cores[k] for t in trains]
        if k == 0:
            core = np.concatenate([c * p for c, p in zip(coeffs, parts)], axis=2)
        elif k == d - 1:
            core = np.concatenate(parts, axis=0)
        else:
            rl = sum(p.shape[0] for p in parts)
            rr = sum(p.shape[2] for p in parts)
            core = np.zeros((rl, dims[k], rr), dtype=np.complex128)
            i = j = 0
            for p in parts:
                core[i : i + p.shape[0], :, j : j + p.shape[2]] = p
                i += p.shape[0]
                j += p.shape[2]
        cores.append(core)
    return TensorTrain(cores, check=False)


def tt_hadamard(a: TensorTrain, b: TensorTrain) -> TensorTrain:
    """Elementwise product; cores are Kronecker products over the rank axes."""
    _same_dims(a, b)
    cores = []
    for ca, cb in zip(a.cores, b.cores):
        ra0, n, ra1 = ca.shape
        rb0, _, rb1 = cb.shape
        c = np.einsum("inj,knl->iknjl", ca, cb).reshape(ra0 * rb0, n, ra1 * rb1)
        cores.append(c)
    return TensorTrain(cores, check=False)


def tt_conj(a: TensorTrain) -> TensorTrain:
    return TensorTrain([c.conj() for c in a.cores], check=False)


def tt_inner(a: TensorTrain, b: TensorTrain, weight: float = 1.0) -> complex:
    """``weight * sum_k conj(a[k]) b[k]`` by a left-to-right bond sweep."""
    _same_dims(a, b)
    v = np.ones((1, 1), dtype=np.complex128)
    for ca, cb in zip(a.cores, b.cores):
        t = np.tensordot(v, cb, axes=(1, 0))
        v = np.tensordot(ca.conj(), t, axes=([0, 1], [0, 1]))
    return complex(weight * v[0, 0])


def tt_norm(a: TensorTrain, weight: float = 1.0) -> float:
    """``sqrt(<a|a>)``; rejects contractions whose imaginary or negative part
    exceeds round-off."""
    s = tt_inner(a, a, weight)
    # round-off of the sweep is bounded by eps times the product of core norms
    noise = 1e3 * np.finfo(float).eps * _core_scale(a, weight)
    if abs(s.imag) > 1e-12 * abs(s.real) + noise:
        raise ArithmeticError(f"<a|a> has a sizeable imaginary part: {s}")
    if s.real < -noise:
        raise ArithmeticError(f"<a|a> is negative: {s.real}")
    return math.sqrt(max(s.real, 0.0))


def _core_scale(a, weight):
    return weight * math.prod(float(np.sum(np.abs(c) ** 2)) for c in a.cores)


def tt_eval(a: TensorTrain, index: Sequence[int]) -> complex:
    if len(index) != a.d:
        raise IndexError(f"need {a.d} indices, got {len(index)}")
    v = np.ones((1, 1), dtype=np.complex128)
    for j, (c, i) in enumerate(zip(a.cores, index)):
        if not 0 <= i < c.shape[1]:
            raise IndexError(f"index {i} out of range for axis {j} of size {c.shape[1]}")
        v = v @ c[:, i, :]
    return complex(v[0, 0])


def _chain(a, lo, hi, fixed):
    """Product of the selected matrices of cores ``lo..hi-1``."""
    r = a.cores[lo].shape[0] if lo < a.d else 1
    v = np.eye(r, dtype=np.complex128)
    for k in range(lo, hi):
        i = fixed[k]
        if not 0 <= i < a.cores[k].shape[1]:
            raise IndexError(f"index {i} out of range for axis {k}")
        v = v @ a.cores[k][:, i, :]
    return v


def tt_slice2d(a: TensorTrain, keep: tuple[int, int], fixed: Sequence[int]) -> np.ndarray:
    """
    Two-dimensional slice through the train.

    ``fixed`` holds one index per dimension; the entries at the kept axes are
    ignored. The three chain segments are contracted once each.
    """
    p, q = keep
    if p == q:
        raise ValueError("the kept axes must differ")
    if p > q:
        return tt_slice2d(a, (q, p), fixed).T
    if not (0 <= p and q < a.d):
        raise IndexError("kept axis out of range")
    if len(fixed) != a.d:
        raise IndexError(f"need {a.d} fixed indices, got {len(fixed)}")
    fixed = list(fixed)
    fixed[p] = fixed[q] = 0
    left = _chain(a, 0, p, fixed)
    mid = _chain(a, p + 1, q, fixed)
    right = _chain(a, q + 1, a.d, fixed)
    cp = np.einsum("ai,inj->naj", left, a.cores[p])[:, 0, :]
    cq = np.einsum("imj,ja->ima", a.cores[q], right)[:, :, 0]
    return cp @ mid @ cq


def tt_mode_apply(
    a: TensorTrain, j: int, transform: np.ndarray | Callable[[np.ndarray], np.ndarray]
) -> TensorTrain:
    """
    Apply a linear map to the mode fibers of core ``j``.

    ``transform`` is an ``(n, n)`` matrix, a length-``n`` diagonal, or a
    callable acting along the last axis of its argument.
    """
    if not 0 <= j < a.d:
        raise IndexError(f"axis {j} out of range for a {a.d}-dimensional train")
    core = a.cores[j]
    n = core.shape[1]
    if callable(transform):
        new = np.moveaxis(transform(np.moveaxis(core, 1, -1)), -1, 1)
    else:
        m = np.asarray(transform)
        if m.ndim == 1:
            if m.shape != (n,):
                raise ValueError(f"diagonal of length {m.shape[0]} for a mode of size {n}")
            new = core * m[None, :, None]
        else:
            if m.shape != (n, n):
                raise ValueError(f"matrix of shape {m.shape} for a mode of size {n}")
            new = np.einsum("mn,anb->amb", m, core)
    if new.shape != core.shape:
        raise ValueError("transform changed the mode size")
    cores = list(a.cores)
    cores[j] = np.asarray(new, dtype=np.complex128)
    return TensorTrain(cores, check=False)


def tt_fft(a: TensorTrain, j: int, inverse: bool = False) -> TensorTrain:
    return tt_mode_apply(a, j, _fft.ifft if inverse else _fft.fft)


# rounding ---------------------------------------------------------------


def _qr(m):
    return scipy.linalg.qr(m, mode="economic", check_finite=False)


def _svd(m):
    """Thin SVD; tall matrices are reduced by a QR factorization first."""
    rows, cols = m.shape
    if rows > 2 * cols:
        q, r = _qr(m)
        u, s, vh = _svd(r)
        return q @ u, s, vh
    try:
        return np.linalg.svd(m, full_matrices=False)
    except np.linalg.LinAlgError:
        return scipy.linalg.svd(m, full_matrices=False, lapack_driver="gesvd")


def right_orthogonalize(a: TensorTrain) -> list[np.ndarray]:
    """Cores with 1..d-1 right-orthonormal; core 0 carries the norm."""
    cores = list(a.cores)
    for k in range(len(cores) - 1, 0, -1):
        c = cores[k]
        r0, n, r1 = c.shape
        q, r = _qr(c.reshape(r0, n * r1).T)
        cores[k] = q.T.reshape(-1, n, r1)
        cores[k - 1] = np.tensordot(cores[k - 1], r.T, axes=(2, 0))
    return cores


def _truncation_rank(s, delta, rmax):
    if delta <= 0:
        keep = int(np.count_nonzero(s > 0))
    else:
        tail = np.sqrt(np.cumsum(s[::-1] ** 2))[::-1]
        # tail[i] is the error made by keeping the first i values
        over = np.nonzero(tail > delta)[0]
        keep = int(over[-1]) + 1 if over.size else 0
    return max(1, min(keep, rmax))


def tt_round(a: TensorTrain, tol: float = DEFAULT_TOL, rmax: int = DEFAULT_RMAX) -> TensorTrain:
    """
    Recompress to the smallest ranks meeting a relative Frobenius tolerance.

    Right-to-left QR orthogonalization followed by a left-to-right truncated
    SVD sweep with per-bond threshold ``tol * ||a|| / sqrt(d - 1)``. When
    ``rmax`` does not bind, ``||a - result|| <= tol * ||a||``.
    """
    if not 0 <= tol < 1:
        raise ValueError(f"tol must lie in [0, 1), got {tol}")
    if rmax < 1:
        raise ValueError(f"rmax must be positive, got {rmax}")
    if a.d == 1:
        return TensorTrain(list(a.cores), check=False)
    cores = right_orthogonalize(a)
    norm = np.linalg.norm(cores[0])
    delta = tol * norm / math.sqrt(a.d - 1)
    for k in range(a.d - 1):
        c = cores[k]
        r0, n, r1 = c.shape
        u, s, vh = _svd(c.reshape(r0 * n, r1))
        r = _truncation_rank(s, delta, rmax)
        cores[k] = u[:, :r].reshape(r0, n, r)
        sv = s[:r, None] * vh[:r]
        cores[k + 1] = np.tensordot(sv, cores[k + 1], axes=(1, 0))
    return TensorTrain(cores, check=False)


def tt_hadamard_exp(
    a: TensorTrain, tol: float = DEFAULT_TOL, rmax: int = DEFAULT_RMAX, bound: float = 1.0
) -> TensorTrain:
    """
    Elementwise exponential by scaling and squaring.

    ``bound`` must dominate ``max |a|``. The argument is halved
    ``m = max(0, ceil(log2(bound)) + 4)`` times, a degree-8 Taylor polynomial
    is evaluated by Horner's rule with Hadamard products, and the result is
    squared ``m`` times, rounding after every product.
    """
    ones = tt_ones(a.dims)
    if bound <= 0:
        if tt_norm(a) == 0.0:
            return ones
        raise ValueError("bound must be positive for a nonzero argument")
    m = max(0, math.ceil(math.log2(bound)) + 4)
    s = tt_scale(a, 2.0**-m)
    q = ones
    for k in range(8, 0, -1):
        q = tt_round(tt_add(ones, tt_hadamard(tt_scale(s, 1.0 / k), q)), tol, rmax)
    for _ in range(m):
        q = tt_round(tt_hadamard(q, q), tol, rmax)
    return q


# serialization ----------------------------------------------------------


def tt_serialize(a: TensorTrain) -> bytes:
    """TTC1 byte stream: magic, u32 d, u64 dims, u64 ranks, then the cores."""
    parts = [TTC_MAGIC, struct.pack("<I", a.d)]
    parts.append(struct.pack(f"<{a.d}Q", *a.dims))
    parts.append(struct.pack(f"<{a.d + 1}Q", *a.ranks))
    for c in a.cores:
        parts.append(np.ascontiguousarray(c, dtype="<c16").tobytes())
    return b"".join(parts)


def tt_deserialize(data: bytes) -> TensorTrain:
    a, end = _read_tt(memoryview(data), 0)
    if end != len(data):
        raise FormatError(f"{len(data) - end} trailing bytes after the train")
    return a


def _read_tt(buf, pos):
    def take(nbytes):
        nonlocal pos
        if pos + nbytes > len(buf):
            raise FormatError("truncated stream")
        chunk = buf[pos : pos + nbytes]
        pos += nbytes
        return chunk

    if bytes(take(4)) != TTC_MAGIC:
        raise FormatError("bad magic, expected TTC1")
    (d,) = struct.unpack("<I", take(4))
    if d < 1:
        raise FormatError("a train needs at least one core")
    dims = struct.unpack(f"<{d}Q", take(8 * d))
    ranks = struct.unpack(f"<{d + 1}Q", take(8 * (d + 1)))
    if ranks[0] != 1 or ranks[-1] != 1 or min(ranks) < 1 or min(dims) < 1:
        raise FormatError(f"inconsistent ranks {ranks} or dims {dims}")
    cores = []
    for k in range(d):
        shape = (ranks[k], dims[k], ranks[k + 1])
        count = math.prod(shape)
        raw = take(16 * count)
        cores.append(np.frombuffer(raw, dtype="<c16").astype(np.complex128).reshape(shape))
    return TensorTrain(cores), pos


def save_tt(path, a: TensorTrain) -> None:
    with open(path, "wb") as fh:
        fh.write(tt_serialize(a))


def load_tt(path) -> TensorTrain:
    with open(path, "rb") as fh:
        return tt_deserialize(fh.read())
