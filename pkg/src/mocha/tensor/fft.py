"""2-D discrete Fourier transform: iterative radix-2 plus a direct DFT.

Power-of-two extents take the radix-2 path; anything else falls back to the
direct O(N^2) evaluation, which doubles as the correctness oracle for the
fast path. Forward is unnormalized, inverse carries the 1/(H*W) factor.

Everything here works on plain complex numpy arrays; the autodiff wrappers
live in :mod:`mocha.tensor.ops`.
"""

from __future__ import annotations

import functools

import numpy as np


def is_pow2(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


@functools.lru_cache(maxsize=64)
def _bit_reverse_indices(n: int) -> np.ndarray:
    bits = n.bit_length() - 1
    idx = np.arange(n)
    rev = np.zeros(n, dtype=np.int64)
    for _ in range(bits):
        rev = (rev << 1) | (idx & 1)
        idx >>= 1
    return rev


@functools.lru_cache(maxsize=64)
def _twiddles(half: int, sign: int) -> np.ndarray:
    return np.exp(sign * 2j * np.pi * np.arange(half) / (2 * half))


def _fft_radix2_last(a: np.ndarray, sign: int) -> np.ndarray:
    """Cooley-Tukey DIT along the last axis; length must be a power of two."""
    n = a.shape[-1]
    out = np.asarray(a[..., _bit_reverse_indices(n)], dtype=np.complex128)
    half = 1
    while half < n:
        view = out.reshape(out.shape[:-1] + (n // (2 * half), 2, half))
        even = view[..., 0, :]
        odd = view[..., 1, :] * _twiddles(half, sign)
        upper = even + odd
        lower = even - odd
        view[..., 0, :] = upper
        view[..., 1, :] = lower
        half *= 2
    return out


@functools.lru_cache(maxsize=64)
def _dft_matrix(n: int, sign: int) -> np.ndarray:
    k = np.arange(n)
    return np.exp(sign * 2j * np.pi * np.outer(k, k) / n)


def dft_direct_last(a: np.ndarray, sign: int = -1) -> np.ndarray:
    """Direct DFT along the last axis: the O(N^2) oracle."""
    w = _dft_matrix(a.shape[-1], sign)
    return np.asarray(a, dtype=np.complex128) @ w


def fft_last(a: np.ndarray, sign: int = -1, force_direct: bool = False) -> np.ndarray:
    n = a.shape[-1]
    if force_direct or not is_pow2(n):
        return dft_direct_last(a, sign)
    return _fft_radix2_last(np.asarray(a, dtype=np.complex128), sign)


def _spatial_axes(ndim: int) -> tuple[int, int]:
    # rank 2 -> (H, W); rank >= 3 -> (..., H, W, C) with channels last
    if ndim < 2:
        raise ValueError("fft2 requires rank >= 2")
    return (-2, -1) if ndim == 2 else (-3, -2)


def fft2_complex(a: np.ndarray, force_direct: bool = False) -> np.ndarray:
    """Unnormalized forward 2-D DFT over the spatial axes.

    Rank-2 input is (H, W); higher-rank input is (..., H, W, C) and the
    transform is applied per channel and per leading index.
    """
    ax_h, ax_w = _spatial_axes(np.ndim(a))
    work = np.moveaxis(np.asarray(a, dtype=np.complex128), (ax_h, ax_w), (-2, -1))
    work = fft_last(work, -1, force_direct)
    work = fft_last(work.swapaxes(-1, -2), -1, force_direct).swapaxes(-1, -2)
    return np.moveaxis(work, (-2, -1), (ax_h, ax_w))


def ifft2_complex(a: np.ndarray, force_direct: bool = False) -> np.ndarray:
    """Inverse 2-D DFT with 1/(H*W) normalization over the spatial axes."""
    ax_h, ax_w = _spatial_axes(np.ndim(a))
    work = np.moveaxis(np.asarray(a, dtype=np.complex128), (ax_h, ax_w), (-2, -1))
    h, w = work.shape[-2], work.shape[-1]
    work = fft_last(work, +1, force_direct)
    work = fft_last(work.swapaxes(-1, -2), +1, force_direct).swapaxes(-1, -2)
    work = work / (h * w)
    return np.moveaxis(work, (-2, -1), (ax_h, ax_w))


def dft2_direct(a: np.ndarray) -> np.ndarray:
    """Direct 2-D DFT oracle (always O(N^2) per axis)."""
    return fft2_complex(a, force_direct=True)
