"""Minimal ISP: white balance, bilinear demosaic, unsharp mask, gamma.

Also the RGGB pack/unpack pair and the remosaic used for pseudo-clean RAW.
All functions are plain numpy (data generation is never differentiated).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DimensionError
from .screen import bayer_channel_indices

GAMMA = 2.2


@dataclass(frozen=True)
class IspParams:
    wb_gains: tuple[float, float, float] = (1.0, 1.0, 1.0)
    sharpen_strength: float = 0.5


def gamma_encode(x: np.ndarray) -> np.ndarray:
    return np.power(np.clip(x, 0.0, None), 1.0 / GAMMA)


def gamma_decode(x: np.ndarray) -> np.ndarray:
    return np.power(np.clip(x, 0.0, None), GAMMA)


def pack_rggb(bayer: np.ndarray) -> np.ndarray:
    """(2H, 2W) mosaic -> (H, W, 4) planes ordered R, G(r-row), G(b-row), B."""
    bayer = np.asarray(bayer, dtype=np.float64)
    if bayer.ndim != 2 or bayer.shape[0] % 2 or bayer.shape[1] % 2:
        raise DimensionError(f"mosaic must be 2D with even extents, got {bayer.shape}")
    return np.stack(
        [bayer[0::2, 0::2], bayer[0::2, 1::2], bayer[1::2, 0::2], bayer[1::2, 1::2]],
        axis=2,
    )


def unpack_rggb(packed: np.ndarray) -> np.ndarray:
    """(H, W, 4) planes -> (2H, 2W) mosaic; inverse of :func:`pack_rggb`."""
    packed = np.asarray(packed, dtype=np.float64)
    if packed.ndim != 3 or packed.shape[2] != 4:
        raise DimensionError(f"packed RAW must be (H, W, 4), got {packed.shape}")
    h, w = packed.shape[:2]
    mosaic = np.empty((2 * h, 2 * w))
    mosaic[0::2, 0::2] = packed[:, :, 0]
    mosaic[0::2, 1::2] = packed[:, :, 1]
    mosaic[1::2, 0::2] = packed[:, :, 2]
    mosaic[1::2, 1::2] = packed[:, :, 3]
    return mosaic


def remosaic(rgb: np.ndarray) -> np.ndarray:
    """Sample an (2H, 2W, 3) image through the RGGB pattern."""
    rgb = np.asarray(rgb, dtype=np.float64)
    if rgb.ndim != 3 or rgb.shape[2] != 3:
        raise DimensionError(f"remosaic input must be (2H, 2W, 3), got {rgb.shape}")
    ch = bayer_channel_indices(rgb.shape[0], rgb.shape[1])
    return np.take_along_axis(rgb, ch[:, :, None], axis=2)[:, :, 0]


def _conv3_replicate(plane: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    padded = np.pad(plane, 1, mode="edge")
    out = np.zeros_like(plane)
    for i in range(3):
        for j in range(3):
            out += kernel[i, j] * padded[i: i + plane.shape[0], j: j + plane.shape[1]]
    return out


_KERNEL_G = np.array([[0, 1, 0], [1, 4, 1], [0, 1, 0]], dtype=np.float64)
_KERNEL_RB = np.array([[1, 2, 1], [2, 4, 2], [1, 2, 1]], dtype=np.float64)
_KERNEL_BLUR = _KERNEL_RB / 16.0


def demosaic_bilinear(bayer: np.ndarray) -> np.ndarray:
    """Bilinear demosaic with adaptive border normalization (monotone)."""
    bayer = np.asarray(bayer, dtype=np.float64)
    if bayer.ndim != 2:
        raise DimensionError(f"demosaic input must be 2D, got {bayer.shape}")
    ch = bayer_channel_indices(bayer.shape[0], bayer.shape[1])
    out = np.empty(bayer.shape + (3,))
    for c, kernel in ((0, _KERNEL_RB), (1, _KERNEL_G), (2, _KERNEL_RB)):
        mask = (ch == c).astype(np.float64)
        num = _conv3_padzero(bayer * mask, kernel)
        den = _conv3_padzero(mask, kernel)
        out[:, :, c] = num / den
    return out


def _conv3_padzero(plane: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    padded = np.pad(plane, 1)
    out = np.zeros_like(plane)
    for i in range(3):
        for j in range(3):
            out += kernel[i, j] * padded[i: i + plane.shape[0], j: j + plane.shape[1]]
    return out


def unsharp_mask(rgb: np.ndarray, strength: float) -> np.ndarray:
    if strength == 0.0:
        return rgb
    blurred = np.stack(
        [_conv3_replicate(rgb[:, :, c], _KERNEL_BLUR) for c in range(3)], axis=2
    )
    return rgb + strength * (rgb - blurred)


def isp_pipeline(bayer: np.ndarray, params: IspParams = IspParams()) -> np.ndarray:
    """Fixed order: white balance, demosaic, sharpen, gamma 1/2.2, clamp."""
    bayer = np.asarray(bayer, dtype=np.float64)
    ch = bayer_channel_indices(bayer.shape[0], bayer.shape[1])
    gains = np.asarray(params.wb_gains)[ch]
    balanced = bayer * gains
    rgb = demosaic_bilinear(balanced)
    rgb = unsharp_mask(rgb, params.sharpen_strength)
    return np.clip(gamma_encode(rgb), 0.0, 1.0)
