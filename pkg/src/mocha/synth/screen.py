"""Screen sub-pixel rendering and Bayer-mosaic capture.

The aliasing mechanism: the rendered field has RGB stripe structure with
period ``pitch`` field cells, and the camera integrates it over a box
footprint of ``scale * pitch`` cells per pixel. At scale 1.0 each camera
pixel covers exactly one content pixel and reconstruction is exact; at
incommensurate scales the residual stripe ripple aliases into a
low-frequency beat.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigError, DimensionError


@dataclass(frozen=True)
class CapturePose:
    """Hand-held camera pose relative to the screen.

    translation: (tx, ty) sub-pixel offsets in camera pixels.
    rotation: small angle in radians (|rotation| <= 0.1).
    scale: sampling-pitch ratio screen/camera; the camera footprint spans
    ``scale * pitch`` field cells, so 1.0 means one content pixel per
    camera pixel.
    """

    translation: tuple[float, float] = (0.0, 0.0)
    rotation: float = 0.0
    scale: float = 1.0

    def __post_init__(self):
        if not (0.5 < self.scale < 2.0):
            raise ConfigError(f"scale must lie in (0.5, 2.0), got {self.scale}")
        if abs(self.rotation) > 0.1:
            raise ConfigError(f"|rotation| must be <= 0.1 rad, got {self.rotation}")

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.translation[0], self.translation[1], self.rotation, self.scale)


def stripe_channel_map(pitch: int) -> np.ndarray:
    """Column index within a block -> emitting channel (vertical RGB thirds)."""
    cols = np.arange(pitch)
    return (cols * 3) // pitch


def render_screen(content: np.ndarray, pitch: int = 3) -> np.ndarray:
    """Expand each content pixel into a pitch x pitch block of RGB stripes.

    ``content`` holds linear emission values (H_s, W_s, 3) in [0, 1]. Each
    stripe is gain-compensated so a box average over one whole block
    reproduces the content value exactly, for any pitch whose thirds are
    non-empty (pitch >= 3).
    """
    content = np.asarray(content, dtype=np.float64)
    if content.ndim != 3 or content.shape[2] != 3:
        raise DimensionError(f"content must be (H, W, 3), got {content.shape}")
    if pitch < 2:
        raise ConfigError(f"pitch must be >= 2, got {pitch}")
    stripes = stripe_channel_map(pitch)
    counts = np.bincount(stripes, minlength=3)
    if np.any(counts == 0):
        raise ConfigError(
            f"pitch {pitch} leaves a colour stripe empty; use pitch >= 3"
        )
    gains = pitch / counts.astype(np.float64)
    hs, ws, _ = content.shape
    up = np.repeat(np.repeat(content, pitch, axis=0), pitch, axis=1)
    mask = np.zeros((pitch, 3))
    mask[np.arange(pitch), stripes] = gains[stripes]
    mask_row = np.tile(mask, (ws, 1))  # (ws*pitch, 3)
    return up * mask_row[None, :, :]


_BAYER_CHANNEL = np.array([[0, 1], [1, 2]])  # RGGB -> R, G, G, B


def bayer_channel_indices(h: int, w: int) -> np.ndarray:
    """Per-pixel colour channel of an RGGB mosaic of shape (h, w)."""
    rows = np.arange(h) % 2
    cols = np.arange(w) % 2
    return _BAYER_CHANNEL[rows[:, None], cols[None, :]]


def capture_cfa(
    field: np.ndarray,
    pose: CapturePose,
    sensor_h: int,
    sensor_w: int,
    pitch: int = 3,
    supersample: int | None = None,
) -> np.ndarray:
    """Sample the posed field through an RGGB Bayer mosaic.

    Each sensor pixel averages ``supersample^2`` point samples spread over
    its box footprint (``scale * pitch`` field cells per axis). The default
    supersample equals the pitch, which makes scale-1.0 zero-pose capture an
    exact block average.
    """
    field = np.asarray(field, dtype=np.float64)
    if field.ndim != 3 or field.shape[2] != 3:
        raise DimensionError(f"field must be (H, W, 3), got {field.shape}")
    ss = pitch if supersample is None else supersample
    if ss < 1:
        raise ConfigError("supersample must be >= 1")
    w_cells = pose.scale * pitch  # footprint per camera pixel, in field cells
    if w_cells < 1.0:
        raise ConfigError("box-filter footprint must cover >= 1 field cell")

    fy = np.arange(sensor_h) + 0.5 - sensor_h / 2.0
    fx = np.arange(sensor_w) + 0.5 - sensor_w / 2.0
    off = ((np.arange(ss) + 0.5) / ss - 0.5)
    # camera-frame coordinates of every sample point, in camera pixels
    cam_y = fy[:, None, None, None] + off[None, None, :, None]
    cam_x = fx[None, :, None, None] + off[None, None, None, :]
    tx, ty = pose.translation
    c, s = np.cos(pose.rotation), np.sin(pose.rotation)
    pos_y = field.shape[0] / 2.0 + w_cells * (c * cam_y - s * cam_x + ty)
    pos_x = field.shape[1] / 2.0 + w_cells * (s * cam_y + c * cam_x + tx)

    yi = np.floor(pos_y).astype(np.int64)
    xi = np.floor(pos_x).astype(np.int64)
    if yi.min() < 0 or xi.min() < 0 or yi.max() >= field.shape[0] or xi.max() >= field.shape[1]:
        raise ConfigError(
            "sampled region exits the rendered field; enlarge the content margin"
        )
    yi, xi = np.broadcast_arrays(yi, xi)
    samples = field[yi, xi, :]          # (sh, sw, ss, ss, 3)
    rgb = samples.mean(axis=(2, 3))     # (sh, sw, 3)
    ch = bayer_channel_indices(sensor_h, sensor_w)
    return np.take_along_axis(rgb, ch[:, :, None], axis=2)[:, :, 0]
