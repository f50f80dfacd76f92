"""Spatio-temporal stage: 3-D window attention with cyclic shifts, Fourier
channel gating, window-wise amplitude/phase refinement, and the residual
block stacking that ties them together.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass

import numpy as np

from ..errors import DimensionError, UsageError
from ..tensor import NDTensor, ParamStore
from ..tensor import ops
from ..tensor.ops import ComplexSpectrum
from . import common as cm

_MASKED = -1e9  # additive logit for disallowed attention pairs


@dataclass(frozen=True)
class StadConfig:
    channels: int
    n_r: int = 4
    n_s: int = 5
    window: tuple[int, int, int] = (2, 7, 7)
    heads: int = 4
    mlp_ratio: int = 2

    def __post_init__(self):
        if self.channels % self.heads:
            raise UsageError(
                f"channels {self.channels} not divisible by {self.heads} heads"
            )
        if any(v < 1 for v in self.window):
            raise UsageError(f"window extents must be positive, got {self.window}")


@dataclass(frozen=True)
class WindowGrid:
    """Bookkeeping for one partition: padding, shift, and attention mask."""

    orig_shape: tuple[int, int, int, int]
    padded_shape: tuple[int, int, int]
    window: tuple[int, int, int]
    shift: tuple[int, int, int]
    mask: np.ndarray | None  # (N, L, L) additive logits, None if all visible

    @property
    def tokens(self) -> int:
        t, k1, k2 = self.window
        return t * k1 * k2

    @property
    def windows(self) -> int:
        pt, ph, pw = self.padded_shape
        t, k1, k2 = self.window
        return (pt // t) * (ph // k1) * (pw // k2)


def _axis_regions(size: int, win: int, shift: int) -> np.ndarray:
    """Swin-style region labels along one axis, in rolled coordinates."""
    labels = np.zeros(size, dtype=np.int64)
    if shift:
        labels[size - win: size - shift] = 1
        labels[size - shift:] = 2
    return labels


@functools.lru_cache(maxsize=128)
def _partition_plan(shape: tuple[int, int, int],
                    window: tuple[int, int, int],
                    shifted: bool):
    """Padding, shift offsets and the cached attention mask for one layout."""
    t, h, w = shape
    wt, wh, ww = window
    pt, ph, pw = (-t) % wt, (-h) % wh, (-w) % ww
    pads = (pt, ph, pw)
    padded = (t + pt, h + ph, w + pw)
    shift = (wt // 2, wh // 2, ww // 2) if shifted else (0, 0, 0)

    if not shifted and not any(pads):
        return pads, padded, shift, None

    # region labels live in the rolled frame; padded voxels get label -1
    valid = np.zeros(padded, dtype=bool)
    valid[:t, :h, :w] = True
    valid = np.roll(valid, tuple(-s for s in shift), axis=(0, 1, 2))
    lt = _axis_regions(padded[0], wt, shift[0])
    lh = _axis_regions(padded[1], wh, shift[1])
    lw = _axis_regions(padded[2], ww, shift[2])
    labels = (lt[:, None, None] * 3 + lh[None, :, None]) * 3 + lw[None, None, :]
    labels = np.where(valid, labels, -1)
    grouped = (
        labels.reshape(padded[0] // wt, wt, padded[1] // wh, wh, padded[2] // ww, ww)
        .transpose(0, 2, 4, 1, 3, 5)
        .reshape(-1, wt * wh * ww)
    )
    mask = np.where(
        grouped[:, :, None] == grouped[:, None, :], 0.0, _MASKED
    )
    if not mask.any():
        mask = None
    return pads, padded, shift, mask


def window_partition_3d(x, window: tuple[int, int, int], shifted: bool = False):
    """(T, H, W, C) -> (N, t*k*k, C) windows plus the grid needed to invert.

    The tensor is zero-padded up to window multiples, cyclically shifted by
    half a window when ``shifted``, and split into non-overlapping blocks.
    """
    t, h, w, c = x.shape
    wt, wh, ww = window
    if wt > t + ((-t) % wt) or wh > h + ((-h) % wh) or ww > w + ((-w) % ww):
        raise DimensionError(f"window {window} larger than padded input {x.shape}")
    pads, padded, shift, mask = _partition_plan((t, h, w), tuple(window), shifted)
    y = x
    if any(pads):
        y = ops.pad(y, ((0, pads[0]), (0, pads[1]), (0, pads[2]), (0, 0)))
    if any(shift):
        y = ops.roll(y, tuple(-s for s in shift), (0, 1, 2))
    nt, nh, nw = padded[0] // wt, padded[1] // wh, padded[2] // ww
    y = ops.reshape(y, (nt, wt, nh, wh, nw, ww, c))
    y = ops.transpose(y, (0, 2, 4, 1, 3, 5, 6))
    windows = ops.reshape(y, (nt * nh * nw, wt * wh * ww, c))
    grid = WindowGrid((t, h, w, c), padded, tuple(window), shift, mask)
    return windows, grid


def window_unpartition_3d(windows, grid: WindowGrid):
    """Exact inverse of :func:`window_partition_3d` on the unpadded region."""
    t, h, w, c = grid.orig_shape
    wt, wh, ww = grid.window
    pt, ph, pw = grid.padded_shape
    nt, nh, nw = pt // wt, ph // wh, pw // ww
    y = ops.reshape(windows, (nt, nh, nw, wt, wh, ww, c))
    y = ops.transpose(y, (0, 3, 1, 4, 2, 5, 6))
    y = ops.reshape(y, (pt, ph, pw, c))
    if any(grid.shift):
        y = ops.roll(y, grid.shift, (0, 1, 2))
    if (pt, ph, pw) != (t, h, w):
        y = ops.unpad(y, ((0, pt - t), (0, ph - h), (0, pw - w), (0, 0)))
    return y


# -- multi-head window attention -----------------------------------------------

def init_mhwa(p: ParamStore, pre: str, rng, c: int) -> None:
    for path in ("q", "k", "v"):
        cm.add_linear(p, f"{pre}{path}", rng, c, c)
    cm.add_linear(p, f"{pre}proj", rng, c, c, gain=cm.RESIDUAL_GAIN)


def mhwa(windows, p: ParamStore, pre: str, heads: int,
         mask: np.ndarray | None = None):
    """Scaled dot-product attention within each window independently."""
    n, length, c = windows.shape
    if c % heads:
        raise DimensionError(f"token dim {c} not divisible by {heads} heads")
    hd = c // heads

    def split(z):
        return ops.transpose(ops.reshape(z, (n, length, heads, hd)), (0, 2, 1, 3))

    q = split(cm.linear(windows, p, f"{pre}q"))
    k = split(cm.linear(windows, p, f"{pre}k"))
    v = split(cm.linear(windows, p, f"{pre}v"))
    logits = ops.mul(ops.matmul(q, ops.transpose(k, (0, 1, 3, 2))), hd ** -0.5)
    if mask is not None:
        logits = ops.add(logits, mask[:, None, :, :])
    attn = ops.softmax(logits, axis=3)
    mixed = ops.matmul(attn, v)
    merged = ops.reshape(ops.transpose(mixed, (0, 2, 1, 3)), (n, length, c))
    return cm.linear(merged, p, f"{pre}proj")


# -- Fourier channel attention ---------------------------------------------------

def init_fca(p: ParamStore, pre: str, rng, c: int) -> None:
    hidden = max(c // 4, 1)
    cm.add_pwconv(p, f"{pre}reduce", rng, 2 * c, hidden)
    cm.add_pwconv(p, f"{pre}expand", rng, hidden, c, gain=cm.RESIDUAL_GAIN)


def fca(x, p: ParamStore, pre: str):
    """Channel gate from pooled real/imaginary spectra, per frame."""
    spec = ops.fft2(x)
    stacked = ops.concat([spec.re, spec.im], axis=-1)
    pooled = ops.global_avg_pool(stacked)
    weights = cm.pwconv(ops.relu(cm.pwconv(pooled, p, f"{pre}reduce")), p, f"{pre}expand")
    return ops.mul(x, weights)


# -- spatio-temporal transformer block ------------------------------------------

def init_sfb(p: ParamStore, pre: str, rng, cfg: StadConfig) -> None:
    c = cfg.channels
    cm.add_layer_norm(p, f"{pre}ln1", c)
    init_mhwa(p, f"{pre}mhwa.", rng, c)
    init_fca(p, f"{pre}fca.", rng, c)
    p.add(f"{pre}lambda_ca", cm.scalar(1.0))
    cm.add_layer_norm(p, f"{pre}ln2", c)
    cm.add_pwconv(p, f"{pre}mlp1", rng, c, cfg.mlp_ratio * c)
    cm.add_pwconv(p, f"{pre}mlp2", rng, cfg.mlp_ratio * c, c, gain=cm.RESIDUAL_GAIN)


def sfb_forward(x, p: ParamStore, pre: str, cfg: StadConfig, shifted: bool):
    u = cm.layer_norm(x, p, f"{pre}ln1")
    windows, grid = window_partition_3d(u, cfg.window, shifted)
    wa = window_unpartition_3d(
        mhwa(windows, p, f"{pre}mhwa.", cfg.heads, grid.mask), grid
    )
    ca = fca(u, p, f"{pre}fca.")
    fused = ops.add(wa, ops.mul(ca, p[f"{pre}lambda_ca"]))
    y = ops.add(x, fused)
    z = cm.layer_norm(y, p, f"{pre}ln2")
    z = cm.pwconv(ops.gelu(cm.pwconv(z, p, f"{pre}mlp1")), p, f"{pre}mlp2")
    return ops.add(y, z)


# -- amplitude / phase refinement -------------------------------------------------

def init_arb(p: ParamStore, pre: str, rng, c: int) -> None:
    for rate in (1, 2, 4):
        cm.add_dwconv(p, f"{pre}d{rate}.dconv", rng, c)
        cm.add_pwconv(p, f"{pre}d{rate}.pconv", rng, c, c)
    cm.add_pwconv(p, f"{pre}fuse", rng, 3 * c, c, gain=cm.RESIDUAL_GAIN)


def arb(amp, p: ParamStore, pre: str):
    """Three dilated depthwise branches over the amplitude, fused 3C -> C."""
    branches = [
        cm.pwconv(cm.dwconv(amp, p, f"{pre}d{rate}.dconv", dilation=rate),
                  p, f"{pre}d{rate}.pconv")
        for rate in (1, 2, 4)
    ]
    return cm.pwconv(ops.concat(branches, axis=-1), p, f"{pre}fuse")


def init_prb(p: ParamStore, pre: str, rng, c: int) -> None:
    cm.add_dwconv(p, f"{pre}dconv", rng, c)
    cm.add_pwconv(p, f"{pre}pconv", rng, c, c, gain=cm.RESIDUAL_GAIN)
    hidden = max(c // 4, 1)
    cm.add_pwconv(p, f"{pre}se.reduce", rng, c, hidden)
    cm.add_pwconv(p, f"{pre}se.expand", rng, hidden, c)


def prb(phase, p: ParamStore, pre: str):
    """Depthwise-separable conv over the phase plus a squeeze-excite gate."""
    y = cm.pwconv(cm.dwconv(phase, p, f"{pre}dconv"), p, f"{pre}pconv")
    pooled = ops.global_avg_pool(y)
    gate = ops.sigmoid(
        cm.pwconv(ops.relu(cm.pwconv(pooled, p, f"{pre}se.reduce")), p, f"{pre}se.expand")
    )
    return ops.mul(y, gate)


def init_wfb(p: ParamStore, pre: str, rng, c: int) -> None:
    init_arb(p, f"{pre}arb.", rng, c)
    init_prb(p, f"{pre}prb.", rng, c)


def _spatial_partition(x, k: int):
    t, h, w, c = x.shape
    ph, pw = (-h) % k, (-w) % k
    y = x
    if ph or pw:
        y = ops.pad(y, ((0, 0), (0, ph), (0, pw), (0, 0)))
    nh, nw = (h + ph) // k, (w + pw) // k
    y = ops.reshape(y, (t, nh, k, nw, k, c))
    y = ops.transpose(y, (0, 1, 3, 2, 4, 5))
    return ops.reshape(y, (t * nh * nw, k, k, c)), (t, h, w, c, nh, nw, ph, pw)


def _spatial_unpartition(windows, info):
    t, h, w, c, nh, nw, ph, pw = info
    k = windows.shape[1]
    y = ops.reshape(windows, (t, nh, nw, k, k, c))
    y = ops.transpose(y, (0, 1, 3, 2, 4, 5))
    y = ops.reshape(y, (t, h + ph, w + pw, c))
    if ph or pw:
        y = ops.unpad(y, ((0, 0), (0, ph), (0, pw), (0, 0)))
    return y


def wfb_core(x, p: ParamStore, pre: str, k: int):
    """Window FFT -> polar split -> branch refinement -> inverse FFT."""
    windows, info = _spatial_partition(x, k)
    spec = ops.fft2(windows)
    amp, phase = ops.polar(spec.re, spec.im)
    amp = arb(amp, p, f"{pre}arb.")
    phase = prb(phase, p, f"{pre}prb.")
    re = ops.mul(amp, ops.cos(phase))
    im = ops.mul(amp, ops.sin(phase))
    back = ops.ifft2(ComplexSpectrum(re, im))
    return _spatial_unpartition(back, info)


def wfb(x, p: ParamStore, pre: str, k: int):
    """Residual frequency refinement on spatial k x k windows, per frame."""
    return ops.add(x, wfb_core(x, p, pre, k))


# -- residual hybrid blocks --------------------------------------------------------

def init_rhatb(p: ParamStore, pre: str, rng, cfg: StadConfig) -> None:
    for j in range(1, cfg.n_s + 1):
        init_sfb(p, f"{pre}sfb{j}.", rng, cfg)
    init_wfb(p, f"{pre}wfb.", rng, cfg.channels)
    cm.add_conv(p, f"{pre}conv", rng, cfg.channels, cfg.channels,
                gain=cm.RESIDUAL_GAIN)


def rhatb(x, p: ParamStore, pre: str, cfg: StadConfig):
    """n_s attention blocks (odd ones shifted), frequency refinement, then a
    residual-in-residual convolution."""
    y = x
    for j in range(1, cfg.n_s + 1):
        y = sfb_forward(y, p, f"{pre}sfb{j}.", cfg, shifted=bool(j % 2))
    y = wfb(y, p, f"{pre}wfb.", cfg.window[1])
    return ops.add(x, cm.conv(y, p, f"{pre}conv"))


def init_stad(p: ParamStore, pre: str, rng, cfg: StadConfig) -> None:
    for i in range(1, cfg.n_r + 1):
        init_rhatb(p, f"{pre}rhatb{i}.", rng, cfg)
    cm.add_conv(p, f"{pre}conv", rng, cfg.channels, cfg.channels,
                gain=cm.RESIDUAL_GAIN)


def stad_forward(f_ma, p: ParamStore, pre: str, cfg: StadConfig):
    y = f_ma
    for i in range(1, cfg.n_r + 1):
        y = rhatb(y, p, f"{pre}rhatb{i}.", cfg)
    return cm.conv(y, p, f"{pre}conv")
