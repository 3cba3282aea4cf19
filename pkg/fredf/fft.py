"""Mixed-radix fast Fourier transform kernels.

The transform works on any length by splitting off the smallest prime
factor at each level (decimation in time). Prime lengths fall back to a
dense DFT matrix, which only ever happens for the small prime factors of
the lengths used here (2, 3, 17, ...). All kernels operate along one axis
of an n-dimensional array; every other axis is carried as a batch.
"""

from functools import lru_cache

import numpy as np


@lru_cache(maxsize=64)
def _smallest_factor(n: int) -> int:
    if n % 2 == 0:
        return 2
    f = 3
    while f * f <= n:
        if n % f == 0:
            return f
        f += 2
    return n


@lru_cache(maxsize=128)
def _dft_matrix(n: int) -> np.ndarray:
    k = np.arange(n)
    out = np.exp(-2j * np.pi * np.outer(k, k) / n)
    out.setflags(write=False)
    return out


@lru_cache(maxsize=128)
def _twiddles(n: int, p: int) -> np.ndarray:
    # T[k, r] = exp(-2 pi i r k / n) for k < n / p
    k = np.arange(n // p)
    r = np.arange(p)
    out = np.exp(-2j * np.pi * np.outer(k, r) / n)
    out.setflags(write=False)
    return out


def _fft_columns(x: np.ndarray) -> np.ndarray:
    """Forward FFT along axis 0 of a complex (n, F) array."""
    n = x.shape[0]
    if n == 1:
        return x.copy()
    p = _smallest_factor(n)
    if p == n:
        return _dft_matrix(n) @ x
    m = n // p
    width = x.shape[1]
    # x[s * p + r, f] lands in column r * F + f of the (m, p * F) view,
    # so all p decimated subsequences recurse as one batch.
    sub = _fft_columns(x.reshape(m, p * width)).reshape(m, p, width)
    sub = sub * _twiddles(n, p)[:, :, None]
    out = np.einsum("qr,krf->qkf", _dft_matrix(p), sub)
    return out.reshape(n, width)


def fft(x: np.ndarray, axis: int = -2) -> np.ndarray:
    """Unnormalized forward DFT of ``x`` along ``axis``."""
    x = np.moveaxis(np.asarray(x), axis, 0)
    shape = x.shape
    cols = x.reshape(shape[0], -1).astype(np.complex128, copy=False)
    out = _fft_columns(cols).reshape(shape)
    return np.moveaxis(out, 0, axis)


def ifft_unnormalized(z: np.ndarray, axis: int = -2) -> np.ndarray:
    """Sum ``z[k] * exp(+2 pi i k t / n)`` over k, without the 1/n factor."""
    return np.conj(fft(np.conj(z), axis=axis))


def direct_dft(x: np.ndarray, axis: int = -2) -> np.ndarray:
    """O(n^2) reference DFT, used as a test oracle."""
    x = np.moveaxis(np.asarray(x, dtype=np.complex128), axis, 0)
    n = x.shape[0]
    out = np.tensordot(_dft_matrix(n), x, axes=(1, 0))
    return np.moveaxis(out, 0, axis)
