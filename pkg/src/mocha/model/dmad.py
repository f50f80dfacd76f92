"""Decoupling stage: twin convolutional branches that split features into
pre-demoiréd content and a predicted moiré component, supervision heads
over both, and a transposed cross-attention gate that conditions the
content features on the predicted moiré.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DimensionError, UsageError
from ..tensor import NDTensor, ParamStore
from ..tensor import ops
from . import common as cm


@dataclass(frozen=True)
class DmadConfig:
    channels: int
    n_m: int = 4
    attention_heads: int = 1

    def __post_init__(self):
        if self.n_m < 1:
            raise UsageError("n_m must be >= 1")
        if self.channels % self.attention_heads:
            raise UsageError(
                f"channels {self.channels} not divisible by "
                f"{self.attention_heads} attention heads"
            )


@dataclass
class DmadOutput:
    f_c: NDTensor       # pre-demoiréd feature, (T, H, W, C)
    f_m: NDTensor       # predicted moiré feature, (T, H, W, C)
    f_ma: NDTensor      # moiré-adaptive feature, (T, H, W, C)
    a_ma: NDTensor      # sigmoid gate, (T, H, W, C)
    i_cf_raw: NDTensor  # (T, H, W, 4)
    i_pm_raw: NDTensor  # (T, H, W, 4)
    i_m_rgb: NDTensor   # (T, 2H, 2W, 3)


# -- residual conv blocks ----------------------------------------------------

def init_conv_block(p: ParamStore, pre: str, rng, c: int) -> None:
    cm.add_dwconv(p, f"{pre}dconv", rng, c)
    cm.add_layer_norm(p, f"{pre}ln", c)
    cm.add_pwconv(p, f"{pre}pconv1", rng, c, c)
    cm.add_pwconv(p, f"{pre}pconv2", rng, c, c, gain=cm.RESIDUAL_GAIN)


def conv_block(x, p: ParamStore, pre: str):
    y = cm.dwconv(x, p, f"{pre}dconv")
    y = cm.layer_norm(y, p, f"{pre}ln")
    y = cm.pwconv(y, p, f"{pre}pconv1")
    y = ops.gelu(y)
    return cm.pwconv(y, p, f"{pre}pconv2")


def init_conv_block_stack(p: ParamStore, pre: str, rng, c: int, n_m: int) -> None:
    for i in range(n_m):
        init_conv_block(p, f"{pre}block{i}.", rng, c)


def conv_block_stack(x, p: ParamStore, pre: str, n_m: int):
    """Parallel residual ensemble: out = x + sum_i B_i(x).

    Every block consumes the ORIGINAL input; block outputs are summed onto
    it (this is not a sequential chain).
    """
    out = x
    for i in range(n_m):
        out = ops.add(out, conv_block(x, p, f"{pre}block{i}."))
    return out


# -- twin decoupling branches ------------------------------------------------

def init_mdb(p: ParamStore, pre: str, rng, cfg: DmadConfig) -> None:
    init_conv_block_stack(p, f"{pre}pdb.", rng, cfg.channels, cfg.n_m)
    init_conv_block_stack(p, f"{pre}mpb.", rng, cfg.channels, cfg.n_m)


def mdb_forward(f0, p: ParamStore, pre: str, cfg: DmadConfig):
    """Shared input, independent weights: (pre-demoiréd, predicted moiré)."""
    f_c = conv_block_stack(f0, p, f"{pre}pdb.", cfg.n_m)
    f_m = conv_block_stack(f0, p, f"{pre}mpb.", cfg.n_m)
    return f_c, f_m


# -- supervision heads --------------------------------------------------------

def init_ddb(p: ParamStore, pre: str, rng, cfg: DmadConfig) -> None:
    c = cfg.channels
    cm.add_conv(p, f"{pre}cf.conv1", rng, c, c)
    cm.add_conv(p, f"{pre}cf.conv2", rng, c, 4, gain=cm.RESIDUAL_GAIN)
    cm.add_conv(p, f"{pre}pm.conv1", rng, c, c)
    cm.add_conv(p, f"{pre}pm.conv2", rng, c, 4, gain=cm.RESIDUAL_GAIN)
    cm.add_conv(p, f"{pre}rgb.conv1", rng, 4, c)
    cm.add_conv(p, f"{pre}rgb.conv2", rng, c, 12, gain=cm.RESIDUAL_GAIN)


def _raw_head(x, p, pre):
    y = ops.gelu(cm.conv(x, p, f"{pre}conv1"))
    return ops.gelu(cm.conv(y, p, f"{pre}conv2"))


def ddb_heads(f_c, f_m, p: ParamStore, pre: str):
    """Project both branches to packed RAW, and the content prediction on
    to a doubled-resolution sRGB frame via pixel shuffle."""
    i_cf_raw = _raw_head(f_c, p, f"{pre}cf.")
    i_pm_raw = _raw_head(f_m, p, f"{pre}pm.")
    y = ops.gelu(cm.conv(i_cf_raw, p, f"{pre}rgb.conv1"))
    y = cm.conv(y, p, f"{pre}rgb.conv2")
    i_m_rgb = ops.pixel_shuffle(y, 2)
    return i_cf_raw, i_pm_raw, i_m_rgb


# -- transposed cross-attention gate ------------------------------------------

def init_mcb(p: ParamStore, pre: str, rng, cfg: DmadConfig) -> None:
    c = cfg.channels
    for path in ("q", "k", "v"):
        cm.add_pwconv(p, f"{pre}{path}.pconv", rng, c, c)
        cm.add_dwconv(p, f"{pre}{path}.dconv", rng, c)
    p.add(f"{pre}log_lambda", cm.zeros(cfg.attention_heads, 1, 1))


def _embed(x, p, pre):
    # equation order: point-wise first, then depth-wise
    return cm.dwconv(cm.pwconv(x, p, f"{pre}pconv"), p, f"{pre}dconv")


def mcb_forward(f_c, f_m, p: ParamStore, pre: str, cfg: DmadConfig,
                collect: dict | None = None):
    """Channel-wise (transposed) cross-attention, one frame at a time.

    The attention map is C x C per head: queries come from the content
    branch, keys/values from the moiré branch, softmax runs over the key
    channel axis, and the gated output multiplies the content features.
    """
    if f_c.shape != f_m.shape:
        raise DimensionError(f"branch shapes differ: {f_c.shape} vs {f_m.shape}")
    t, h, w, c = f_c.shape
    heads = cfg.attention_heads
    hd = c // heads
    lam = ops.exp(p[f"{pre}log_lambda"])  # positive temperature per head
    gates, fused = [], []
    for frame in range(t):
        fc_t = ops.take_index(f_c, 0, frame)
        fm_t = ops.take_index(f_m, 0, frame)
        q = _embed(fc_t, p, f"{pre}q.")
        k = _embed(fm_t, p, f"{pre}k.")
        v = _embed(fm_t, p, f"{pre}v.")
        # (H, W, C) -> (heads, C/heads, HW)
        def to_mat(z):
            zm = ops.transpose(ops.reshape(z, (h * w, c)), (1, 0))
            return ops.reshape(zm, (heads, hd, h * w))
        qm, km, vm = to_mat(q), to_mat(k), to_mat(v)
        scores = ops.div(ops.matmul(qm, ops.transpose(km, (0, 2, 1))), lam)
        attn = ops.softmax(scores, axis=2)  # rows sum to 1 over key channels
        if collect is not None:
            collect.setdefault("attn", []).append(attn)
        mixed = ops.matmul(attn, vm)  # (heads, hd, HW)
        back = ops.transpose(ops.reshape(mixed, (c, h * w)), (1, 0))
        f_attn = ops.reshape(back, (h, w, c))
        a_t = ops.sigmoid(f_attn)
        gates.append(ops.reshape(a_t, (1, h, w, c)))
        fused.append(ops.reshape(ops.mul(fc_t, a_t), (1, h, w, c)))
    a_ma = ops.concat(gates, 0)
    f_ma = ops.concat(fused, 0)
    return f_ma, a_ma


# -- full module ---------------------------------------------------------------

def init_dmad(p: ParamStore, pre: str, rng, cfg: DmadConfig) -> None:
    init_mdb(p, f"{pre}mdb.", rng, cfg)
    init_ddb(p, f"{pre}ddb.", rng, cfg)
    init_mcb(p, f"{pre}mcb.", rng, cfg)


def dmad_forward(f0, p: ParamStore, pre: str, cfg: DmadConfig,
                 collect: dict | None = None) -> DmadOutput:
    f_c, f_m = mdb_forward(f0, p, f"{pre}mdb.", cfg)
    i_cf_raw, i_pm_raw, i_m_rgb = ddb_heads(f_c, f_m, p, f"{pre}ddb.")
    f_ma, a_ma = mcb_forward(f_c, f_m, p, f"{pre}mcb.", cfg, collect)
    return DmadOutput(f_c, f_m, f_ma, a_ma, i_cf_raw, i_pm_raw, i_m_rgb)
