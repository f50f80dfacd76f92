from .losses import (
    LossConfig,
    LossWeights,
    StageTargets,
    l1_loss,
    l2_mean,
    mc_loss,
    pd_loss,
    perceptual_surrogate,
    stage_losses,
)
from .loop import (
    TrainConfig,
    TrainResult,
    config_hash,
    evaluate_psnr,
    psnr,
    save_checkpoint,
    train_stage1,
    train_stage2,
    train_two_stage,
)
from .optim import OptimizerState, adamw_step
from .wnnm import (
    GroupingParams,
    PatchGroupSet,
    WnnmParams,
    gather_patch_groups,
    group_patches,
    mp_loss,
    singular_values,
    singular_values_batched,
)

__all__ = [
    "GroupingParams",
    "LossConfig",
    "LossWeights",
    "OptimizerState",
    "PatchGroupSet",
    "StageTargets",
    "TrainConfig",
    "TrainResult",
    "WnnmParams",
    "adamw_step",
    "config_hash",
    "evaluate_psnr",
    "gather_patch_groups",
    "group_patches",
    "l1_loss",
    "l2_mean",
    "mc_loss",
    "mp_loss",
    "pd_loss",
    "perceptual_surrogate",
    "psnr",
    "save_checkpoint",
    "singular_values",
    "singular_values_batched",
    "stage_losses",
    "train_stage1",
    "train_stage2",
    "train_two_stage",
]
