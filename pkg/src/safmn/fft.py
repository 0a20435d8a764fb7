"""2-D fast Fourier transform for arbitrary plane sizes.

Power-of-two lengths use an iterative radix-2 decimation-in-time transform;
everything else goes through Bluestein's chirp-z algorithm, which reduces any
length to a power-of-two convolution.  The forward transform is unnormalized;
the inverse divides by the element count.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError

_bitrev_cache: dict[int, np.ndarray] = {}
_twiddle_cache: dict[int, list[np.ndarray]] = {}
_bluestein_cache: dict[int, tuple[np.ndarray, np.ndarray, int]] = {}
_dft_matrix_cache: dict[int, np.ndarray] = {}

# Below this length a dense DFT matrix product (BLAS) beats the staged
# transform; both paths compute the same unnormalized DFT.
_MATRIX_MAX = 128


@dataclass
class ComplexPlane:
    """A (h, w) complex field stored as separate real/imaginary planes."""

    re: np.ndarray
    im: np.ndarray

    def __post_init__(self):
        self.re = np.asarray(self.re, dtype=np.float64)
        self.im = np.asarray(self.im, dtype=np.float64)
        if self.re.ndim != 2 or self.re.shape != self.im.shape:
            raise DimensionError(
                f"ComplexPlane: re {self.re.shape} and im {self.im.shape} must be equal 2-D shapes"
            )

    @classmethod
    def from_real(cls, plane: np.ndarray) -> "ComplexPlane":
        plane = np.asarray(plane, dtype=np.float64)
        return cls(plane, np.zeros_like(plane))

    def to_complex(self) -> np.ndarray:
        return self.re + 1j * self.im

    @property
    def shape(self) -> tuple[int, int]:
        return self.re.shape


def _bitrev_permutation(n: int) -> np.ndarray:
    perm = _bitrev_cache.get(n)
    if perm is None:
        bits = n.bit_length() - 1
        idx = np.arange(n, dtype=np.int64)
        perm = np.zeros(n, dtype=np.int64)
        for _ in range(bits):
            perm = (perm << 1) | (idx & 1)
            idx >>= 1
        _bitrev_cache[n] = perm
    return perm


def _stage_twiddles(n: int) -> list[np.ndarray]:
    tables = _twiddle_cache.get(n)
    if tables is None:
        tables = []
        size = 2
        while size <= n:
            half = size // 2
            tables.append(np.exp(-2j * np.pi * np.arange(half) / size))
            size *= 2
        _twiddle_cache[n] = tables
    return tables


def _fft_pow2(a: np.ndarray) -> np.ndarray:
    """Radix-2 DIT transform along the last axis (length must be 2**k)."""
    n = a.shape[-1]
    if n == 1:
        return a.copy()
    a = a[..., _bitrev_permutation(n)]
    for tw in _stage_twiddles(n):
        half = tw.shape[0]
        size = half * 2
        a = a.reshape(a.shape[:-1] + (n // size, size))
        even = a[..., :half]
        odd = a[..., half:] * tw
        a = np.concatenate([even + odd, even - odd], axis=-1)
        a = a.reshape(a.shape[:-2] + (n,))
    return a


def _bluestein_tables(n: int) -> tuple[np.ndarray, np.ndarray, int]:
    cached = _bluestein_cache.get(n)
    if cached is None:
        # exp(-i*pi*k^2/n) with k^2 reduced mod 2n to keep the argument small
        k2 = (np.arange(n, dtype=np.int64) ** 2) % (2 * n)
        chirp = np.exp(-1j * np.pi * k2 / n)
        m = 1
        while m < 2 * n - 1:
            m *= 2
        b = np.zeros(m, dtype=np.complex128)
        b[:n] = np.conj(chirp)
        b[m - n + 1 :] = np.conj(chirp[1:][::-1])
        cached = (chirp, _fft_pow2(b), m)
        _bluestein_cache[n] = cached
    return cached


def _dft_matrix(n: int) -> np.ndarray:
    mat = _dft_matrix_cache.get(n)
    if mat is None:
        k = np.arange(n)
        mat = np.exp(-2j * np.pi * np.outer(k, k) / n)
        _dft_matrix_cache[n] = mat
    return mat


def _fft_any(a: np.ndarray) -> np.ndarray:
    """Forward DFT along the last axis for any length."""
    n = a.shape[-1]
    if n == 1:
        return a.astype(np.complex128, copy=True)
    if n <= _MATRIX_MAX:
        return np.asarray(a, dtype=np.complex128) @ _dft_matrix(n)
    if n & (n - 1) == 0:
        return _fft_pow2(a.astype(np.complex128, copy=False))
    chirp, b_hat, m = _bluestein_tables(n)
    buf = np.zeros(a.shape[:-1] + (m,), dtype=np.complex128)
    buf[..., :n] = a * chirp
    conv = _ifft_pow2(_fft_pow2(buf) * b_hat)
    return conv[..., :n] * chirp


def _ifft_pow2(a: np.ndarray) -> np.ndarray:
    n = a.shape[-1]
    return np.conj(_fft_pow2(np.conj(a))) / n


def fft_along_last(a: np.ndarray) -> np.ndarray:
    return _fft_any(np.asarray(a))


def fft2_batched(a: np.ndarray) -> np.ndarray:
    """Unnormalized 2-D DFT over the last two axes (leading axes batched)."""
    out = _fft_any(np.asarray(a))
    out = _fft_any(out.swapaxes(-1, -2))
    return out.swapaxes(-1, -2)


def ifft2_batched(a: np.ndarray) -> np.ndarray:
    """Inverse of :func:`fft2_batched`, normalized by h*w."""
    h, w = a.shape[-2], a.shape[-1]
    return np.conj(fft2_batched(np.conj(a))) / (h * w)


def fft2d(plane: ComplexPlane) -> ComplexPlane:
    """Unnormalized forward 2-D DFT of a plane."""
    z = fft2_batched(plane.to_complex())
    return ComplexPlane(z.real, z.imag)


def ifft2d(plane: ComplexPlane) -> ComplexPlane:
    """Inverse 2-D DFT; ifft2d(fft2d(x)) == x."""
    z = ifft2_batched(plane.to_complex())
    return ComplexPlane(z.real, z.imag)
