"""Procedural screen content: gradients, glyph-like rasters, noise octaves.

Everything is generated from an explicit numpy Generator so a (seed, shape)
pair always produces the same frames. Values are sRGB-encoded in [0, 1].
"""

from __future__ import annotations

import numpy as np

from ..errors import ConfigError

KINDS = ("gradient", "glyphs", "noise", "mix")


def _unit_grid(h: int, w: int) -> tuple[np.ndarray, np.ndarray]:
    y = np.linspace(0.0, 1.0, h)[:, None]
    x = np.linspace(0.0, 1.0, w)[None, :]
    return np.broadcast_to(y, (h, w)), np.broadcast_to(x, (h, w))


def gradient_frame(rng: np.random.Generator, h: int, w: int) -> np.ndarray:
    """Smooth two-colour ramp with a random orientation plus a soft disc."""
    yy, xx = _unit_grid(h, w)
    theta = rng.uniform(0, 2 * np.pi)
    ramp = (np.cos(theta) * xx + np.sin(theta) * yy + 1.0) / 2.0
    c0 = rng.uniform(0.05, 0.95, size=3)
    c1 = rng.uniform(0.05, 0.95, size=3)
    img = ramp[:, :, None] * c1 + (1.0 - ramp[:, :, None]) * c0
    cy, cx = rng.uniform(0.2, 0.8, size=2)
    r = rng.uniform(0.1, 0.3)
    disc = np.exp(-(((yy - cy) ** 2 + (xx - cx) ** 2) / (2 * r * r)))
    tint = rng.uniform(-0.25, 0.25, size=3)
    return np.clip(img + disc[:, :, None] * tint, 0.0, 1.0)


def glyph_frame(rng: np.random.Generator, h: int, w: int) -> np.ndarray:
    """Text-like raster: light background with dark bars and strokes."""
    bg = rng.uniform(0.7, 0.95, size=3)
    fg = rng.uniform(0.0, 0.25, size=3)
    img = np.ones((h, w, 3)) * bg
    rows = max(h // 12, 1)
    for row in range(1, h // rows):
        if rng.uniform() < 0.3:
            continue
        y0 = row * rows
        y1 = min(y0 + max(rows // 2, 1), h)
        x = int(rng.uniform(0, w // 8))
        while x < w - 2:
            run = int(rng.uniform(2, max(w // 10, 3)))
            gap = int(rng.uniform(1, max(w // 16, 2)))
            img[y0:y1, x: min(x + run, w)] = fg
            x += run + gap
    return img


def noise_frame(rng: np.random.Generator, h: int, w: int) -> np.ndarray:
    """Value-noise octaves, independently per channel, bilinearly upsampled."""
    img = np.zeros((h, w, 3))
    amp, total = 1.0, 0.0
    for octave in (4, 8, 16, 32):
        coarse = rng.uniform(0.0, 1.0, size=(octave + 1, octave + 1, 3))
        img += amp * _bilinear_upsample(coarse, h, w)
        total += amp
        amp *= 0.55
    return img / total


def _bilinear_upsample(grid: np.ndarray, h: int, w: int) -> np.ndarray:
    gy = np.linspace(0.0, grid.shape[0] - 1.0, h)
    gx = np.linspace(0.0, grid.shape[1] - 1.0, w)
    y0 = np.floor(gy).astype(int)
    x0 = np.floor(gx).astype(int)
    y1 = np.minimum(y0 + 1, grid.shape[0] - 1)
    x1 = np.minimum(x0 + 1, grid.shape[1] - 1)
    fy = (gy - y0)[:, None, None]
    fx = (gx - x0)[None, :, None]
    top = grid[y0][:, x0] * (1 - fx) + grid[y0][:, x1] * fx
    bottom = grid[y1][:, x0] * (1 - fx) + grid[y1][:, x1] * fx
    return top * (1 - fy) + bottom * fy


_FRAME_FNS = {
    "gradient": gradient_frame,
    "glyphs": glyph_frame,
    "noise": noise_frame,
}


def content_video(
    rng: np.random.Generator,
    frames: int,
    h: int,
    w: int,
    kind: str = "mix",
    drift: tuple[int, int] = (0, 0),
) -> np.ndarray:
    """A (T, h, w, 3) sRGB clip: one base frame, optionally drifting.

    ``drift`` is an integer (dy, dx) content-pixel scroll per frame; zero
    drift yields a static clip so all temporal variation comes from capture.
    """
    if kind == "mix":
        kind = KINDS[rng.integers(0, 3)]
    try:
        base = _FRAME_FNS[kind](rng, h, w)
    except KeyError:
        raise ConfigError(f"unknown content kind {kind!r}") from None
    out = np.empty((frames, h, w, 3))
    for t in range(frames):
        out[t] = np.roll(base, (t * drift[0], t * drift[1]), axis=(0, 1))
    return out
