"""
Initial states, analytic harmonic-oscillator oracles and observables.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .function_train import (
    Basis,
    FunctionTrain,
    basis_project_function,
    ft_add,
    ft_eval,
    ft_from_rank1,
    ft_inner,
    ft_scale,
)
from .tensor_train import (
    GridSpec,
    TensorTrain,
    right_orthogonalize,
    tt_add,
    tt_conj,
    tt_from_rank1,
    tt_hadamard,
    tt_inner,
    tt_scale,
    tt_slice2d,
)


def _vector(v, d, name):
    v = np.atleast_1d(np.asarray(v, dtype=float))
    if v.size == 1:
        v = np.full(d, float(v[0]))
    if v.size != d:
        raise ValueError(f"{name} has {v.size} entries for dimension {d}")
    return v


@dataclass(frozen=True)
class GaussianParams:
    """
    Product Gaussian ``prod_i (w/pi)^(1/4) exp(-(w/2)(x_i-x0_i)^2 + i p0_i (x_i-x0_i))``.

    ``width`` is ``w``; ``x0`` and ``p0`` are per-dimension tuples.
    """

    width: float
    x0: tuple[float, ...]
    p0: tuple[float, ...]

    def __post_init__(self):
        x0 = tuple(float(v) for v in np.atleast_1d(self.x0))
        p0 = tuple(float(v) for v in np.atleast_1d(self.p0))
        object.__setattr__(self, "x0", x0)
        object.__setattr__(self, "p0", p0)
        if not self.width > 0:
            raise ValueError("width must be positive")
        if len(x0) != len(p0) or not x0:
            raise ValueError("x0 and p0 must be non-empty and equally long")

    @classmethod
    def uniform(cls, d: int, width: float, x0: float, p0: float) -> "GaussianParams":
        return cls(width, (x0,) * d, (p0,) * d)

    @property
    def d(self) -> int:
        return len(self.x0)

    def factor(self, j: int, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        w, c, p = self.width, self.x0[j], self.p0[j]
        return (w / np.pi) ** 0.25 * np.exp(-0.5 * w * (x - c) ** 2 + 1j * p * (x - c))


def _warn_if_near_edge(params: GaussianParams, bounds):
    margin = 3.0 / math.sqrt(params.width)
    for j, (lo, hi) in enumerate(bounds):
        c = params.x0[j]
        if c - lo < margin or hi - c < margin:
            warnings.warn(
                f"dimension {j}: Gaussian centre {c} lies within {margin:.3g} of the boundary",
                RuntimeWarning,
                stacklevel=3,
            )
            return


def initial_gaussian(params: GaussianParams, where, fmt: str | None = None):
    """
    Rank-one product Gaussian on a grid (tensor train) or on bases (function
    train). ``where`` is a ``GridSpec`` or a sequence of ``Basis``.
    """
    if fmt is None:
        fmt = "tt" if isinstance(where, GridSpec) else "ft"
    if fmt == "tt":
        if not isinstance(where, GridSpec):
            raise TypeError("a tensor-train state needs a GridSpec")
        if where.d != params.d:
            raise ValueError("grid and Gaussian dimensions differ")
        _warn_if_near_edge(params, zip(where.x_min, where.x_max))
        return tt_from_rank1([params.factor(j, where.nodes(j)) for j in range(params.d)])
    if fmt != "ft":
        raise ValueError(f"unknown format {fmt!r}")
    bases = list(where)
    if len(bases) != params.d:
        raise ValueError("bases and Gaussian dimensions differ")
    _warn_if_near_edge(params, [(b.a, b.b) for b in bases])
    vecs = [basis_project_function(b, lambda x, j=j: params.factor(j, x)) for j, b in enumerate(bases)]
    return ft_from_rank1(bases, vecs)


# harmonic oscillator oracle ---------------------------------------------------


@dataclass(frozen=True)
class AnalyticCoherentState:
    """Coherent state of ``p^2/2m + m omega^2 x^2/2`` in every dimension."""

    omega: float
    mass: float
    alpha0: tuple[complex, ...]

    def __post_init__(self):
        object.__setattr__(self, "alpha0", tuple(complex(a) for a in np.atleast_1d(self.alpha0)))
        if not self.omega > 0 or not self.mass > 0:
            raise ValueError("omega and mass must be positive")

    @classmethod
    def from_gaussian(cls, params: GaussianParams, omega: float, mass: float) -> "AnalyticCoherentState":
        """Coherent state whose ``t = 0`` profile is ``params`` (needs ``width == m omega``)."""
        if not math.isclose(params.width, mass * omega, rel_tol=1e-12):
            raise ValueError("a coherent state needs width = mass * omega")
        s = math.sqrt(2 * mass * omega)
        alpha = [math.sqrt(mass * omega / 2) * x + 1j * p / s for x, p in zip(params.x0, params.p0)]
        return cls(omega, mass, tuple(alpha))

    @property
    def d(self) -> int:
        return len(self.alpha0)

    def alpha(self, t: float) -> np.ndarray:
        return np.exp(-1j * self.omega * t) * np.array(self.alpha0)

    def factor(self, j: int, t: float, x) -> np.ndarray:
        """
        One-dimensional factor

            (m w/pi)^(1/4) exp(-m w x^2/2 + sqrt(2 m w) a x - a^2/2 - |a|^2/2)
            * exp(-i w t/2) * exp(-i Re a0 Im a0)

        with ``a = a(t)``. The zero-point phase makes it solve the
        time-dependent equation; the constant phase makes ``t = 0`` equal the
        Gaussian ``(w/pi)^(1/4) exp(-(w/2)(x-x0)^2 + i p0 (x-x0))``.
        """
        x = np.asarray(x, dtype=float)
        mw = self.mass * self.omega
        a = np.exp(-1j * self.omega * t) * self.alpha0[j]
        a0 = self.alpha0[j]
        expo = -0.5 * mw * x**2 + math.sqrt(2 * mw) * a * x - 0.5 * a**2 - 0.5 * abs(a) ** 2
        expo = expo - 0.5j * self.omega * t - 1j * a0.real * a0.imag
        return (mw / np.pi) ** 0.25 * np.exp(expo)


def coherent_state_analytic(cs: AnalyticCoherentState, t: float, x) -> complex | np.ndarray:
    """Closed-form wavefunction at ``x`` (last axis runs over dimensions)."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != cs.d:
        raise ValueError(f"need {cs.d} coordinates")
    out = np.ones(x.shape[:-1], dtype=np.complex128)
    for j in range(cs.d):
        out = out * cs.factor(j, t, x[..., j])
    return complex(out) if out.ndim == 0 else out


def coherent_state_tt(cs: AnalyticCoherentState, t: float, grid: GridSpec) -> TensorTrain:
    return tt_from_rank1([cs.factor(j, t, grid.nodes(j)) for j in range(cs.d)])


def coherent_state_ft(cs: AnalyticCoherentState, t: float, bases: Sequence[Basis]) -> FunctionTrain:
    vecs = [basis_project_function(b, lambda x, j=j: cs.factor(j, t, x)) for j, b in enumerate(bases)]
    return ft_from_rank1(bases, vecs)


def coherent_survival_amplitude(cs: AnalyticCoherentState, t: float) -> complex:
    """``<psi(0)|psi(t)> = prod_j exp(-i w t/2) exp(-|a0|^2 + conj(a0) a(t))``."""
    out = 1.0 + 0j
    for a0 in cs.alpha0:
        at = np.exp(-1j * cs.omega * t) * a0
        out *= np.exp(-0.5j * cs.omega * t - abs(a0) ** 2 + np.conj(a0) * at)
    return complex(out)


def coherent_center(cs: AnalyticCoherentState, t: float) -> np.ndarray:
    """Expected position ``sqrt(2/(m w)) Re a(t)``."""
    return math.sqrt(2 / (cs.mass * cs.omega)) * cs.alpha(t).real


# observables ------------------------------------------------------------------


def inner(a, b, volume: float = 1.0) -> complex:
    """``<a|b>``: weighted sum for tensor trains, exact integral for function trains."""
    if isinstance(a, TensorTrain) and isinstance(b, TensorTrain):
        return tt_inner(a, b, volume)
    if isinstance(a, FunctionTrain) and isinstance(b, FunctionTrain):
        return ft_inner(a, b)
    raise TypeError("both states must have the same format")


def survival_amplitude(psi0, psit, volume: float = 1.0) -> complex:
    """``S(t) = <psi0|psi(t)>``; pass the grid volume element for tensor trains."""
    return inner(psi0, psit, volume)


def state_norm(psi, volume: float = 1.0) -> float:
    return math.sqrt(max(inner(psi, psi, volume).real, 0.0))


def l2_error(a, b, volume: float = 1.0) -> float:
    """
    ``||a - b||`` of the explicit difference.

    A QR sweep moves the norm into the first core, so the round-off is of
    order ``eps * ||a||`` rather than the ``sqrt(eps)`` floor of expanding
    ``<a|a> + <b|b> - 2 Re <a|b>``.
    """
    if isinstance(a, TensorTrain) and isinstance(b, TensorTrain):
        diff = tt_add(a, tt_scale(b, -1.0))
    elif isinstance(a, FunctionTrain) and isinstance(b, FunctionTrain):
        diff = ft_add(a, ft_scale(b, -1.0)).coeffs
        volume = 1.0
    else:
        raise TypeError("both states must have the same format")
    return float(np.linalg.norm(right_orthogonalize(diff)[0])) * math.sqrt(volume)


def density_slice2d(
    psi,
    keep: tuple[int, int],
    fixed: Sequence[float],
    grid: GridSpec | None = None,
    points: int | None = None,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    ``|psi|^2`` on a 2-D lattice through the kept dimensions.

    ``fixed`` gives one coordinate per dimension (entries at the kept
    dimensions are ignored). Tensor trains snap each fixed coordinate to the
    nearest grid node and return the grid axes. Function trains are
    evaluated on a uniform lattice of ``points`` nodes per kept axis
    (default: the basis degree) laid out like a grid.

    Returns
    -------
    xp, xq, density
    """
    p, q = keep
    d = psi.d
    if p == q or not (0 <= p < d and 0 <= q < d):
        raise ValueError(f"invalid kept dimensions {keep} for d = {d}")
    if len(fixed) != d:
        raise ValueError(f"need {d} fixed coordinates")
    if isinstance(psi, TensorTrain):
        if grid is None:
            raise ValueError("tensor-train slices need the grid")
        idx = [grid.nearest_index(j, fixed[j]) for j in range(d)]
        vals = tt_slice2d(psi, (p, q), idx)
        return grid.nodes(p), grid.nodes(q), np.abs(vals) ** 2
    bp, bq = psi.bases[p], psi.bases[q]
    npts_p = points or bp.p
    npts_q = points or bq.p
    xp = bp.a + np.arange(npts_p) * bp.length / npts_p
    xq = bq.a + np.arange(npts_q) * bq.length / npts_q
    gp, gq = np.meshgrid(xp, xq, indexing="ij")
    coords = [np.full(gp.shape, float(fixed[j])) for j in range(d)]
    coords[p], coords[q] = gp, gq
    vals = ft_eval(psi, coords)
    return xp, xq, np.abs(vals) ** 2


def reduced_density2d(psi: TensorTrain, keep: tuple[int, int], grid: GridSpec) -> np.ndarray:
    """
    Marginal ``int |psi|^2`` over all dimensions except the kept pair.

    ``|psi|^2`` is formed as a Hadamard product with the conjugate and the
    other modes are summed with their grid spacings.
    """
    p, q = keep
    if p == q or not (0 <= p < psi.d and 0 <= q < psi.d):
        raise ValueError(f"invalid kept dimensions {keep}")
    if p > q:
        return reduced_density2d(psi, (q, p), grid).T
    rho = tt_hadamard(tt_conj(psi), psi)
    dx = grid.dx
    mats = []
    for j, core in enumerate(rho.cores):
        if j in (p, q):
            mats.append(None)
        else:
            mats.append(dx[j] * core.sum(axis=1))

    def chain(lo, hi):
        r = rho.cores[lo].shape[0] if lo < rho.d else 1
        v = np.eye(r, dtype=np.complex128)
        for k in range(lo, hi):
            v = v @ mats[k]
        return v

    left, mid, right = chain(0, p), chain(p + 1, q), chain(q + 1, rho.d)
    cp = np.einsum("ai,inj->naj", left, rho.cores[p])[:, 0, :]
    cq = np.einsum("imj,ja->ima", rho.cores[q], right)[:, :, 0]
    return (cp @ mid @ cq).real
