"""Training losses: pixel terms, the frozen perceptual surrogate, the
decoupling supervision terms, and the per-stage combination.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass, field

import numpy as np

from ..errors import DimensionError, UsageError
from ..tensor import NDTensor, ParamStore, he_uniform
from ..tensor import ops
from .wnnm import GroupingParams, WnnmParams, mp_loss

PERCEPTUAL_SEED = 0xC0FFEE
_PYRAMID_WIDTHS = (8, 16, 32, 64)


@dataclass(frozen=True)
class LossWeights:
    percept: float = 0.01  # lambda_1
    pd: float = 1.0        # lambda_2
    mp: float = 1.0        # lambda_3
    mc: float = 0.5        # lambda_4

    def __post_init__(self):
        if min(self.percept, self.pd, self.mp, self.mc) < 0:
            raise UsageError("loss weights must be non-negative")


def _check_same_shape(a, b):
    if a.shape != b.shape:
        raise DimensionError(f"loss operands disagree: {a.shape} vs {b.shape}")


def l1_loss(pred, target) -> NDTensor:
    """Mean absolute difference over every element."""
    _check_same_shape(pred, target)
    return ops.tmean(ops.absolute(ops.sub(pred, target)))


def l2_mean(pred, target) -> NDTensor:
    """Root of the mean squared difference, normalized by the full element
    count (T*H*W*C)."""
    _check_same_shape(pred, target)
    return ops.sqrt(ops.tmean(ops.square(ops.sub(pred, target))))


def pd_loss(i_m_rgb, gt_rgb) -> NDTensor:
    """Supervises the decoupling RGB head against the clean sRGB frames."""
    return l2_mean(i_m_rgb, gt_rgb)


def mc_loss(i_cf_raw, i_pm_raw, i_raw) -> NDTensor:
    """Cyclic constraint: content + moiré predictions must re-compose the
    input RAW frames (rules out the all-zero moiré solution)."""
    _check_same_shape(i_cf_raw, i_pm_raw)
    return l2_mean(ops.add(i_cf_raw, i_pm_raw), i_raw)


# ---------------------------------------------------------------------------
# frozen perceptual surrogate
# ---------------------------------------------------------------------------

@functools.lru_cache(maxsize=4)
def _surrogate_weights(seed: int) -> tuple:
    """Seeded 4-level conv pyramid (stride 2), never trained."""
    rng = np.random.default_rng(seed)
    weights = []
    cin = 3
    for width in _PYRAMID_WIDTHS:
        w = he_uniform(rng, (3, 3, cin, width), 9 * cin).array
        b = np.zeros(width)
        weights.append((w, b))
        cin = width
    return tuple(weights)


def _pyramid_features(x, weights):
    y = x
    for w, b in weights:
        y = ops.gelu(ops.add(ops.conv2d(y, w, stride=2), b))
    return y


def perceptual_surrogate(pred_rgb, gt_rgb, seed: int = PERCEPTUAL_SEED) -> NDTensor:
    """L2 between frozen pyramid features; gradients reach ``pred`` only."""
    _check_same_shape(pred_rgb, gt_rgb)
    if pred_rgb.shape[-1] != 3:
        raise DimensionError(f"perceptual loss expects 3 channels, got {pred_rgb.shape}")
    weights = _surrogate_weights(seed)
    pred_f = _pyramid_features(pred_rgb, weights)
    gt_arr = gt_rgb.array if isinstance(gt_rgb, NDTensor) else np.asarray(gt_rgb)
    gt_f = _pyramid_features(gt_arr, weights)  # constant path: never taped
    return l2_mean(pred_f, gt_f)


# ---------------------------------------------------------------------------
# stage combination
# ---------------------------------------------------------------------------

@dataclass
class StageTargets:
    gt_rgb_seq: NDTensor  # (T, 2H, 2W, 3) clean sRGB frames
    i_raw: NDTensor       # (T, H, W, 4) moiré input RAW

    @property
    def gt_center(self) -> NDTensor:
        return ops.take_index(self.gt_rgb_seq, 0, self.gt_rgb_seq.shape[0] // 2)


@dataclass(frozen=True)
class LossConfig:
    weights: LossWeights = field(default_factory=LossWeights)
    grouping: GroupingParams = field(default_factory=GroupingParams)
    wnnm: WnnmParams = field(default_factory=WnnmParams)
    perceptual_seed: int = PERCEPTUAL_SEED


def stage_losses(i_rgb_hat, aux, targets: StageTargets, stage: int,
                 cfg: LossConfig = LossConfig()):
    """Total loss plus a per-term report (term values sum to the total)."""
    if stage not in (1, 2):
        raise UsageError(f"stage must be 1 or 2, got {stage}")
    w = cfg.weights
    gt_center = targets.gt_center
    terms: dict[str, NDTensor] = {
        "l1": l1_loss(i_rgb_hat, gt_center),
        "percept": ops.mul(
            perceptual_surrogate(i_rgb_hat, gt_center, cfg.perceptual_seed),
            w.percept,
        ),
    }
    if stage == 2:
        if aux is None:
            raise UsageError("stage-2 losses need the decoupling outputs")
        terms["pd"] = ops.mul(pd_loss(aux.i_m_rgb, targets.gt_rgb_seq), w.pd)
        terms["mp"] = ops.mul(mp_loss(aux.i_pm_raw, cfg.grouping, cfg.wnnm), w.mp)
        terms["mc"] = ops.mul(
            mc_loss(aux.i_cf_raw, aux.i_pm_raw, targets.i_raw), w.mc
        )
    total = None
    for value in terms.values():
        total = value if total is None else ops.add(total, value)
    report = {name: value.item() for name, value in terms.items()}
    report["total"] = total.item()
    return total, report
