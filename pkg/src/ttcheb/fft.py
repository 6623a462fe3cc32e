"""Iterative radix-2 Cooley-Tukey FFT acting along the last axis.

Conventions follow numpy: the forward transform is unnormalized with kernel
``exp(-2j*pi*j*k/n)`` and the inverse carries the ``1/n`` factor.
"""

from functools import lru_cache

import numpy as np


def is_power_of_two(n):
    return n >= 1 and (n & (n - 1)) == 0


@lru_cache(maxsize=None)
def _bit_reversal(n):
    bits = n.bit_length() - 1
    idx = np.arange(n)
    rev = np.zeros(n, dtype=np.int64)
    for b in range(bits):
        rev |= ((idx >> b) & 1) << (bits - 1 - b)
    return rev


@lru_cache(maxsize=None)
def _twiddles(m, inverse):
    sign = 1.0 if inverse else -1.0
    return np.exp(sign * 2j * np.pi * np.arange(m // 2) / m)


def _transform(x, inverse):
    x = np.asarray(x, dtype=np.complex128)
    n = x.shape[-1]
    if not is_power_of_two(n):
        raise ValueError(f"radix-2 FFT needs a power-of-two length, got {n}")
    lead = x.shape[:-1]
    y = x[..., _bit_reversal(n)].reshape(-1, n)
    m = 2
    while m <= n:
        half = m // 2
        blocks = y.reshape(y.shape[0], n // m, m)
        even = blocks[..., :half]
        odd = blocks[..., half:] * _twiddles(m, inverse)
        y = np.concatenate((even + odd, even - odd), axis=-1).reshape(-1, n)
        m *= 2
    y = y.reshape(*lead, n)
    if inverse:
        y = y / n
    return y


def fft(x):
    """Forward DFT of ``x`` along its last axis."""
    return _transform(x, inverse=False)


def ifft(x):
    """Inverse DFT of ``x`` along its last axis."""
    return _transform(x, inverse=True)


def fft_matrix(n, inverse=False):
    """Dense matrix of the (inverse) DFT, built by transforming unit vectors."""
    return _transform(np.eye(n), inverse).T
