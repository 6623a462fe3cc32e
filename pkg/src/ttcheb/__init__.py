"""Chebyshev wavepacket propagation on discrete and functional tensor trains."""

from .tensor_train import (
    GridSpec,
    TensorTrain,
    tt_add,
    tt_eval,
    tt_from_rank1,
    tt_hadamard,
    tt_hadamard_exp,
    tt_inner,
    tt_mode_apply,
    tt_norm,
    tt_round,
    tt_scale,
    tt_slice2d,
    tt_sum_nn,
)
from .function_train import Basis, FunctionTrain
from .hamiltonian import HamiltonianSpec, SpectralBounds, spectral_bounds
from .propagators import ChebyshevPlan, RunReport, bessel_j_sequence

__version__ = "0.1.0"

__all__ = [
    "Basis",
    "ChebyshevPlan",
    "FunctionTrain",
    "GridSpec",
    "HamiltonianSpec",
    "RunReport",
    "SpectralBounds",
    "TensorTrain",
    "bessel_j_sequence",
    "spectral_bounds",
    "tt_add",
    "tt_eval",
    "tt_from_rank1",
    "tt_hadamard",
    "tt_hadamard_exp",
    "tt_inner",
    "tt_mode_apply",
    "tt_norm",
    "tt_round",
    "tt_scale",
    "tt_slice2d",
    "tt_sum_nn",
]
