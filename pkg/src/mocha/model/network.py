"""Full restoration network: shallow feature extractor, optional decoupling
stage, spatio-temporal stage, skip connection, and the reconstruction head
that doubles resolution into a single sRGB frame.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import DimensionError, UsageError
from ..tensor import NDTensor, ParamStore
from ..tensor import ops
from . import common as cm
from .dmad import DmadConfig, DmadOutput, dmad_forward, init_dmad
from .stad import StadConfig, init_stad, stad_forward

FRAMES = 3  # the network consumes exactly three consecutive RAW frames


@dataclass(frozen=True)
class ModelConfig:
    channels: int = 32
    n_m: int = 4
    dmad_heads: int = 1
    n_r: int = 4
    n_s: int = 5
    window: tuple[int, int, int] = (2, 7, 7)
    heads: int = 4
    mlp_ratio: int = 2

    @property
    def dmad(self) -> DmadConfig:
        return DmadConfig(self.channels, self.n_m, self.dmad_heads)

    @property
    def stad(self) -> StadConfig:
        return StadConfig(
            self.channels, self.n_r, self.n_s, self.window, self.heads,
            self.mlp_ratio,
        )

    def describe(self) -> dict[str, str]:
        return {
            "channels": str(self.channels),
            "n_m": str(self.n_m),
            "dmad_heads": str(self.dmad_heads),
            "n_r": str(self.n_r),
            "n_s": str(self.n_s),
            "window_t": str(self.window[0]),
            "window_k": str(self.window[1]),
            "heads": str(self.heads),
            "mlp_ratio": str(self.mlp_ratio),
        }


def init_model(cfg: ModelConfig, seed: int) -> ParamStore:
    """Seeded parameter store covering SFE, DMAD, STAD, and EIB."""
    rng = np.random.default_rng(seed)
    p = ParamStore()
    cm.add_conv(p, "sfe.conv", rng, 4, cfg.channels)
    init_dmad(p, "dmad.", rng, cfg.dmad)
    init_stad(p, "stad.", rng, cfg.stad)
    cm.add_conv(p, "eib.conv1", rng, cfg.channels, cfg.channels)
    cm.add_conv(p, "eib.conv2", rng, cfg.channels, 12, gain=cm.RESIDUAL_GAIN)
    return p


def section_names(p: ParamStore, section: str) -> list[str]:
    return p.names(f"{section}.")


def mocha_forward(i_raw, p: ParamStore, cfg: ModelConfig, stage: int = 2,
                  collect: dict | None = None):
    """(3, H, W, 4) packed RAW -> ((2H, 2W, 3) sRGB, decoupling outputs).

    Stage 1 bypasses the decoupling stage entirely (features pass through
    untouched and no DMAD parameter is consumed); stage 2 runs it and
    returns its outputs for loss attachment.
    """
    if stage not in (1, 2):
        raise UsageError(f"stage must be 1 or 2, got {stage}")
    if i_raw.ndim != 4 or i_raw.shape[0] != FRAMES or i_raw.shape[3] != 4:
        raise DimensionError(
            f"input must be ({FRAMES}, H, W, 4) packed RAW, got {i_raw.shape}"
        )
    f0 = cm.conv(i_raw, p, "sfe.conv")
    aux: DmadOutput | None = None
    if stage == 1:
        f_ma = f0
    else:
        aux = dmad_forward(f0, p, "dmad.", cfg.dmad, collect)
        f_ma = aux.f_ma
    f_d = stad_forward(f_ma, p, "stad.", cfg.stad)
    center = ops.add(ops.take_index(f_d, 0, 1), ops.take_index(f0, 0, 1))
    y = cm.conv(center, p, "eib.conv1")
    y = cm.conv(y, p, "eib.conv2")
    i_rgb_hat = ops.pixel_shuffle(y, 2)
    return i_rgb_hat, aux
