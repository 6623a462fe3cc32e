import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import random_tt
from ttcheb.errors import FormatError
from ttcheb.hamiltonian import HamiltonianSpec
from ttcheb.models import GaussianParams
from ttcheb.tensor_train import (
    GridSpec,
    TensorTrain,
    tt_add,
    tt_deserialize,
    tt_eval,
    tt_fft,
    tt_from_rank1,
    tt_hadamard,
    tt_hadamard_exp,
    tt_inner,
    tt_mode_apply,
    tt_norm,
    tt_ones,
    tt_round,
    tt_scale,
    tt_serialize,
    tt_slice2d,
    tt_sum_nn,
    tt_zeros,
)


def rel(a, b):
    return np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-300)


# types ------------------------------------------------------------------------


def test_core_invariants_are_checked():
    with pytest.raises(ValueError):
        TensorTrain([np.ones((2, 3, 1))])
    with pytest.raises(ValueError):
        TensorTrain([np.ones((1, 3, 2)), np.ones((3, 3, 1))])
    with pytest.raises(ValueError):
        TensorTrain([])
    with pytest.raises(ValueError):
        TensorTrain([np.full((1, 2, 1), np.nan)])


def test_grid_spacings():
    g = GridSpec.uniform(2, -5.0, 5.0, 32)
    assert g.dx[0] == pytest.approx(0.3125)
    assert np.all(np.abs(g.dp * g.dx * np.array(g.n) - 2 * np.pi) <= 4 * np.spacing(2 * np.pi))
    assert g.nodes(0)[0] == -5.0 and g.nodes(0)[-1] == pytest.approx(4.6875)
    assert g.momenta(0)[17] == pytest.approx(-15 * g.dp[0])


@pytest.mark.parametrize("n", [1, 12, 33])
def test_grid_rejects_bad_sizes(n):
    with pytest.raises(ValueError):
        GridSpec.uniform(1, -1.0, 1.0, n)


def test_grid_rejects_empty_interval():
    with pytest.raises(ValueError):
        GridSpec((1.0,), (1.0,), (8,))


# construction -----------------------------------------------------------------


def test_rank1_examples():
    a = tt_from_rank1([[1, 1], [1, 1]])
    assert all(tt_eval(a, i) == 1 for i in itertools.product(range(2), repeat=2))
    b = tt_from_rank1([[1, 2], [3, 4]])
    assert tt_eval(b, (1, 1)) == 8
    assert tt_eval(b, (0, 1)) == 4
    assert b.ranks == [1, 1, 1]


def test_rank1_errors():
    with pytest.raises(ValueError):
        tt_from_rank1([])
    with pytest.raises(ValueError):
        tt_from_rank1([[1.0], []])


def test_rank1_gaussian_50d_norm():
    g = GridSpec.uniform(50, -5.0, 5.0, 32)
    gp = GaussianParams.uniform(50, 1.0, 1.0, 0.0)
    a = tt_from_rank1([gp.factor(j, g.nodes(j)) for j in range(50)])
    one_d = np.sum(np.abs(gp.factor(0, g.nodes(0))) ** 2) * g.dx[0]
    assert tt_norm(a, g.volume) ** 2 == pytest.approx(one_d**50, rel=1e-12)
    assert abs(tt_norm(a, g.volume) - 1) < 1e-3


def test_sum_nn_small_examples():
    a = tt_sum_nn([np.array([1.0, 2.0, 3.0])], 5.0, [np.zeros(3)])
    assert a.ranks == [1, 1] and np.allclose(a.full(), [1, 2, 3])
    x = [np.array([0.0, 1.0])] * 3
    b = tt_sum_nn([np.zeros(2)] * 3, 1.0, x)
    assert tt_eval(b, (1, 1, 1)) == pytest.approx(2.0)
    assert max(b.ranks) == 3
    c = tt_sum_nn([np.ones(2)] * 3, 0.0, x)
    assert max(c.ranks) == 2
    with pytest.raises(ValueError):
        tt_sum_nn([], 1.0, [])


def test_sum_nn_dna_matches_dense(rng):
    g = GridSpec.uniform(4, -5.0, 5.0, 32)
    spec = HamiltonianSpec(model="dna", alpha=0.1, beta=-2.0, grid=g)
    xs = [g.nodes(j) for j in range(4)]
    a = tt_sum_nn([spec.onebody(x) for x in xs], spec.coupling, xs)
    assert a.max_rank <= 3
    for _ in range(1000):
        idx = rng.integers(0, 32, size=4)
        x = np.array([xs[j][idx[j]] for j in range(4)])
        exact = spec.potential(x)
        assert abs(tt_eval(a, idx) - exact) <= 1e-12 * max(abs(exact), 1.0)


def test_eval_dna_d3_direct(rng):
    g = GridSpec.uniform(3, -5.0, 5.0, 32)
    spec = HamiltonianSpec(model="dna", alpha=0.1, beta=-2.0, grid=g)
    xs = [g.nodes(j) for j in range(3)]
    a = tt_sum_nn([spec.onebody(x) for x in xs], spec.coupling, xs)
    idx = rng.integers(0, 32, size=3)
    x = [xs[j][idx[j]] for j in range(3)]
    f = lambda t: 0.1 * (0.429 * t - 1.126 * t**2 - 0.143 * t**3 + 0.563 * t**4)
    direct = f(x[0]) + f(x[1]) + f(x[2]) - 0.2 * (x[1] * x[0] + x[2] * x[1])
    assert abs(tt_eval(a, idx) - direct) <= 1e-13 * max(1.0, abs(direct))


def test_eval_errors():
    a = tt_ones([2, 2])
    with pytest.raises(IndexError):
        tt_eval(a, (0, 2))
    with pytest.raises(IndexError):
        tt_eval(a, (0,))


# algebra ----------------------------------------------------------------------


def test_add_examples(rng):
    a = random_tt(rng, [3, 4, 2], 2)
    z = tt_add(a, tt_scale(a, -1.0))
    assert np.max(np.abs(z.full())) < 1e-13
    r1 = tt_from_rank1([[1, 2], [3, 4]])
    assert tt_add(r1, r1).ranks == [1, 2, 1]
    b2, b3 = random_tt(rng, [8] * 3, 2), random_tt(rng, [8] * 3, 3)
    s = tt_add(b2, b3)
    assert s.ranks == [1, 5, 5, 1]
    assert np.max(np.abs(s.full() - b2.full() - b3.full())) < 1e-13 * np.max(np.abs(s.full())) * 10
    with pytest.raises(ValueError):
        tt_add(tt_ones([2]), tt_ones([3]))


def test_hadamard_examples(rng):
    a = random_tt(rng, [3, 4, 5], 2)
    assert rel(tt_hadamard(a, tt_ones(a.dims)).full(), a.full()) < 1e-14
    b = random_tt(rng, [3, 4, 5], 3)
    assert tt_hadamard(a, b).ranks == [1, 6, 6, 1]
    x, y = random_tt(rng, [8] * 3, 2), random_tt(rng, [8] * 3, 2)
    assert rel(tt_hadamard(x, y).full(), x.full() * y.full()) < 1e-13
    with pytest.raises(ValueError):
        tt_hadamard(tt_ones([2]), tt_ones([3]))


def test_scale_examples(rng):
    a = random_tt(rng, [3, 3], 2)
    assert np.array_equal(tt_scale(a, 1.0).full(), a.full())
    assert np.all(tt_scale(a, 0.0).full() == 0)
    assert np.allclose(tt_scale(a, -1j).full(), -1j * a.full(), rtol=0, atol=1e-15 * np.max(np.abs(a.full())))
    assert tt_scale(a, 3.0).ranks == a.ranks


def test_inner_and_norm_examples(rng):
    a = tt_ones([2, 2])
    assert tt_inner(a, a) == 4
    assert tt_norm(a) == 2
    assert tt_norm(tt_zeros([3, 4])) == 0
    x, y = random_tt(rng, [4, 5, 3], 3), random_tt(rng, [4, 5, 3], 2)
    assert tt_inner(x, y) == pytest.approx(np.conj(tt_inner(y, x)), rel=1e-13)
    assert tt_inner(x, y, 0.5) == pytest.approx(0.5 * np.vdot(x.full(), y.full()), rel=1e-12)
    assert tt_norm(x) == pytest.approx(np.linalg.norm(x.full()), rel=1e-12)
    with pytest.raises(ValueError):
        tt_inner(tt_ones([2]), tt_ones([3]))


def test_inner_gaussian_volume():
    g = GridSpec.uniform(2, -5.0, 5.0, 32)
    gp = GaussianParams.uniform(2, 1.0, 0.0, 0.0)
    a = tt_from_rank1([gp.factor(j, g.nodes(j)) for j in range(2)])
    assert abs(tt_inner(a, a, g.volume) - 1) < 1e-6


def test_slice_examples(rng):
    a = random_tt(rng, [5, 6], 3)
    assert np.allclose(tt_slice2d(a, (0, 1), [0, 0]), a.full(), atol=1e-13)
    assert np.allclose(tt_slice2d(a, (1, 0), [0, 0]), a.full().T, atol=1e-13)
    f = [rng.standard_normal(4) for _ in range(4)]
    r1 = tt_from_rank1(f)
    s = tt_slice2d(r1, (1, 3), [2, 0, 1, 0])
    assert np.allclose(s, f[0][2] * f[2][1] * np.outer(f[1], f[3]), atol=1e-14)
    b = random_tt(rng, [8] * 4, 3)
    fixed = [0, 3, 5, 0]
    s = tt_slice2d(b, (0, 3), fixed)
    for i in range(8):
        for j in range(8):
            assert abs(s[i, j] - tt_eval(b, (i, 3, 5, j))) < 1e-13 * max(1.0, abs(s[i, j]))
    with pytest.raises(ValueError):
        tt_slice2d(b, (1, 1), fixed)
    with pytest.raises(IndexError):
        tt_slice2d(b, (0, 1), [0, 0, 9, 0])


def test_mode_apply_examples(rng):
    a = random_tt(rng, [4, 8, 3], 2)
    assert np.array_equal(tt_mode_apply(a, 1, np.eye(8)).full(), a.full())
    r1 = tt_from_rank1([np.ones(3), np.arange(3.0)])
    assert np.allclose(tt_mode_apply(r1, 1, np.full(3, 2.0)).full(), 2 * r1.full())
    back = tt_fft(tt_fft(a, 1), 1, inverse=True)
    assert np.max(np.abs(back.full() - a.full())) < 1e-12
    assert tt_mode_apply(a, 1, np.eye(8)).ranks == a.ranks
    with pytest.raises(IndexError):
        tt_mode_apply(a, 3, np.eye(3))
    with pytest.raises(ValueError):
        tt_mode_apply(a, 0, np.eye(3))


def test_fft_mode_matches_numpy(rng):
    a = random_tt(rng, [4, 8, 2], 2)
    assert np.allclose(tt_fft(a, 1).full(), np.fft.fft(a.full(), axis=1), atol=1e-12)


# rounding ---------------------------------------------------------------------


def test_round_lossless(rng):
    a = random_tt(rng, [3, 4, 5, 2], 3)
    b = tt_round(a, 0.0, 10**9)
    assert all(rb <= ra for ra, rb in zip(a.ranks, b.ranks))
    assert np.max(np.abs(b.full() - a.full())) < 1e-13 * np.max(np.abs(a.full())) * 10


def test_round_removes_redundancy(rng):
    a = random_tt(rng, [4, 4, 4, 4], 2)
    b = tt_round(tt_add(a, a), 1e-12)
    assert max(b.ranks) <= 2
    assert rel(b.full(), 2 * a.full()) < 1e-12


def test_round_tolerance_dense(rng):
    a = random_tt(rng, [8] * 4, 6)
    b = tt_round(a, 1e-6)
    assert rel(b.full(), a.full()) <= 1e-6


def test_round_rank_cap(rng):
    a = random_tt(rng, [8] * 4, 6)
    assert tt_round(a, 0.0, 2).max_rank == 2


def test_round_rejects_bad_args(rng):
    a = random_tt(rng, [3, 3], 2)
    with pytest.raises(ValueError):
        tt_round(a, 1.0)
    with pytest.raises(ValueError):
        tt_round(a, 1e-3, 0)


@given(st.integers(2, 5), st.integers(1, 6), st.sampled_from([1e-2, 1e-4, 1e-8]), st.integers(0, 2**31 - 1))
def test_round_error_bound_property(d, r, tol, seed):
    rng = np.random.default_rng(seed)
    a = tt_add(random_tt(rng, [4] * d, r), tt_scale(random_tt(rng, [4] * d, 2), 1e-3))
    b = tt_round(a, tol)
    assert rel(b.full(), a.full()) <= tol * (1 + 1e-8)
    assert b.dims == a.dims


@given(st.integers(1, 4), st.integers(0, 2**31 - 1))
def test_inner_conjugate_symmetry(d, seed):
    rng = np.random.default_rng(seed)
    a, b = random_tt(rng, [3] * d, 2), random_tt(rng, [3] * d, 3)
    assert tt_inner(a, b) == pytest.approx(np.conj(tt_inner(b, a)), rel=1e-12, abs=1e-12)
    aa = tt_inner(a, a)
    assert aa.real >= 0 and abs(aa.imag) <= 1e-12 * aa.real


@given(st.integers(1, 4), st.integers(0, 2**31 - 1))
def test_pointwise_algebra_property(d, seed):
    rng = np.random.default_rng(seed)
    a, b = random_tt(rng, [3] * d, 2), random_tt(rng, [3] * d, 2)
    fa, fb = a.full(), b.full()
    assert rel(tt_add(a, b).full(), fa + fb) < 1e-12
    assert rel(tt_hadamard(a, b).full(), fa * fb) < 1e-12
    assert rel(tt_scale(a, 2 - 1j).full(), (2 - 1j) * fa) < 1e-12
    ranks = tt_hadamard(a, b).ranks
    assert ranks == [x * y for x, y in zip(a.ranks, b.ranks)]


# elementwise exponential ------------------------------------------------------


def test_hadamard_exp_zero():
    z = tt_zeros([3, 4])
    assert np.array_equal(tt_hadamard_exp(z, bound=0.0).full(), np.ones((3, 4)))


def test_hadamard_exp_real_rank1(rng):
    f = [rng.uniform(-1, 1, 6), rng.uniform(0.5, 1, 5)]
    a = tt_from_rank1(f)
    e = tt_hadamard_exp(a, 1e-14, 64, bound=1.0)
    assert np.max(np.abs(e.full() - np.exp(a.full()))) < 1e-10


def test_hadamard_exp_dna_phase():
    g = GridSpec.uniform(2, -5.0, 5.0, 32)
    spec = HamiltonianSpec(model="dna", beta=-2.0, grid=g)
    from ttcheb.hamiltonian import build_potential, potential_range

    v = build_potential(spec, "tt")
    lo, hi = potential_range(spec, "tt")
    dt = 0.01
    e = tt_hadamard_exp(tt_scale(v, -0.5j * dt), 1e-14, 64, bound=0.5 * dt * max(abs(lo), abs(hi)))
    exact = np.exp(-0.5j * dt * v.full())
    assert np.max(np.abs(e.full() - exact)) < 1e-8
    assert np.max(np.abs(np.abs(e.full()) - 1)) < 1e-8


def test_hadamard_exp_rejects_nonpositive_bound(rng):
    with pytest.raises(ValueError):
        tt_hadamard_exp(random_tt(rng, [2, 2], 1), bound=0.0)


# serialization ----------------------------------------------------------------


def test_serialize_round_trip(rng):
    a = random_tt(rng, [3, 5, 2, 4], 3)
    b = tt_deserialize(tt_serialize(a))
    assert all(np.array_equal(x, y) for x, y in zip(a.cores, b.cores))


def test_serialize_layout():
    a = tt_from_rank1([np.arange(32.0)] * 50)
    data = tt_serialize(a)
    header = 4 + 4 + 8 * 50 + 8 * 51
    assert len(data) == header + sum(16 * 1 * 32 * 1 for _ in range(50))
    assert data[:4] == bytes([0x54, 0x54, 0x43, 0x31])


def test_deserialize_rejects_bad_streams(rng):
    data = tt_serialize(random_tt(rng, [3, 3], 2))
    with pytest.raises(FormatError):
        tt_deserialize(b"XXXX" + data[4:])
    with pytest.raises(FormatError):
        tt_deserialize(data[:-3])
    bad = bytearray(data)
    bad[8 + 16] = 7  # first rank must be one
    with pytest.raises(FormatError):
        tt_deserialize(bytes(bad))


def test_norm_rejects_inconsistent_contraction():
    # a core with wildly mismatched scales still yields a valid norm
    a = tt_from_rank1([np.array([1e-150, 1.0]), np.array([1e150, 1.0])])
    assert tt_norm(a) == pytest.approx(math.sqrt(np.sum(np.abs(a.full()) ** 2)))
