"""Two-stage training: the spatio-temporal path first, then joint training
with the decoupling stage under its own optimizer.
"""

from __future__ import annotations

import csv
import hashlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import NumericalError, UsageError
from ..io import write_container, write_manifest
from ..model import ModelConfig, init_model, mocha_forward
from ..synth import VideoClipPair
from ..tensor import NDTensor, ParamStore, Tape, backward, set_debug_checks
from .losses import LossConfig, StageTargets, stage_losses
from .optim import OptimizerState, adamw_step

MAIN_SECTIONS = ("sfe", "stad", "eib")


@dataclass(frozen=True)
class TrainConfig:
    epochs_stage1: int = 30
    epochs_stage2: int = 30
    lr_stage1: float = 1e-4
    lr_stage2: float = 1e-5
    lr_dmad: float = 1e-4
    stad_lr_mode: str = "compose"  # "compose": stage-2 STAD runs at lr/10
    weight_decay: float = 0.0
    seed: int = 0
    holdout: int = 1
    loss: LossConfig = field(default_factory=LossConfig)

    def __post_init__(self):
        if self.stad_lr_mode not in ("compose", "coincide"):
            raise UsageError(f"unknown stad_lr_mode {self.stad_lr_mode!r}")


@dataclass
class TrainResult:
    params_stage1: ParamStore
    params_stage2: ParamStore | None
    log: list[dict]       # rows: stage, epoch, term, value
    psnr_stage1: float
    psnr_stage2: float | None


def config_hash(model_cfg: ModelConfig, train_cfg: TrainConfig) -> str:
    blob = repr(model_cfg.describe()) + repr(
        (
            train_cfg.epochs_stage1, train_cfg.epochs_stage2,
            train_cfg.lr_stage1, train_cfg.lr_stage2, train_cfg.lr_dmad,
            train_cfg.stad_lr_mode, train_cfg.weight_decay, train_cfg.seed,
            train_cfg.holdout,
        )
    )
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def psnr(pred: np.ndarray, target: np.ndarray) -> float:
    mse = float(np.mean((np.asarray(pred) - np.asarray(target)) ** 2))
    return 10.0 * np.log10(1.0 / max(mse, 1e-12))


def _targets(clip: VideoClipPair) -> StageTargets:
    return StageTargets(gt_rgb_seq=clip.clean_rgb, i_raw=clip.moire_raw)


def _train_step(params, clip, model_cfg, loss_cfg, stage):
    with Tape() as tape:
        pred, aux = mocha_forward(clip.moire_raw, params, model_cfg, stage)
        total, report = stage_losses(pred, aux, _targets(clip), stage, loss_cfg)
    if not np.isfinite(total.item()):
        raise NumericalError(f"stage-{stage} loss diverged to {total.item()!r}")
    grads = backward(tape, total, params)
    by_name = {name: g.array for (name, _), g in zip(params.items(), grads)}
    return by_name, report


def evaluate_psnr(params, clips, model_cfg, stage) -> float:
    values = []
    for clip in clips:
        pred, _ = mocha_forward(clip.moire_raw, params, model_cfg, stage)
        center = clip.clean_rgb.array[clip.clean_rgb.shape[0] // 2]
        values.append(psnr(pred.array, center))
    return float(np.mean(values))


def _split(corpus, holdout):
    if holdout <= 0 or holdout >= len(corpus):
        return corpus, corpus[-1:]
    return corpus[:-holdout], corpus[-holdout:]


def _run_epochs(params, train_clips, held, model_cfg, cfg, stage, epochs,
                optimizers, log):
    for epoch in range(1, epochs + 1):
        sums: dict[str, float] = {}
        for clip in train_clips:
            grads, report = _train_step(params, clip, model_cfg, cfg.loss, stage)
            for state in optimizers:
                adamw_step(params, grads, state)
            for term, value in report.items():
                sums[term] = sums.get(term, 0.0) + value
        for term, value in sums.items():
            log.append({
                "stage": stage, "epoch": epoch, "term": term,
                "value": value / len(train_clips),
            })
        log.append({
            "stage": stage, "epoch": epoch, "term": "psnr",
            "value": evaluate_psnr(params, held, model_cfg, stage),
        })


def train_stage1(corpus, model_cfg: ModelConfig, cfg: TrainConfig,
                 params: ParamStore | None = None):
    """Optimize SFE + STAD + EIB with the stage-1 loss; DMAD is untouched."""
    if len(corpus) < 2:
        raise UsageError("training needs at least two clips")
    params = params if params is not None else init_model(model_cfg, cfg.seed)
    train_clips, held = _split(corpus, cfg.holdout)
    main_names = [n for n in params if n.split(".")[0] in MAIN_SECTIONS]
    opt = OptimizerState.for_params(params, main_names, cfg.lr_stage1,
                                    cfg.weight_decay)
    log: list[dict] = []
    previous = set_debug_checks(False)
    try:
        _run_epochs(params, train_clips, held, model_cfg, cfg, 1,
                    cfg.epochs_stage1, [opt], log)
    finally:
        set_debug_checks(previous)
    return params, log


def train_stage2(corpus, model_cfg: ModelConfig, cfg: TrainConfig,
                 stage1_params: ParamStore):
    """Joint training: main path at reduced rate, DMAD under its own AdamW."""
    if stage1_params is None:
        raise UsageError("stage 2 requires the stage-1 checkpoint")
    params = stage1_params.copy()
    # stage-transition lr scaling: base lr drops to lr_stage2, and in the
    # "compose" reading the spatio-temporal blocks run at a further 1/10
    stad_scale = 0.1 if cfg.stad_lr_mode == "compose" else 1.0
    for name in params:
        section = name.split(".")[0]
        if section == "stad":
            params.set_lr_scale(name, stad_scale)
        elif section in MAIN_SECTIONS:
            params.set_lr_scale(name, 1.0)
    train_clips, held = _split(corpus, cfg.holdout)
    main_names = [n for n in params if n.split(".")[0] in MAIN_SECTIONS]
    dmad_names = [n for n in params if n.split(".")[0] == "dmad"]
    opt_main = OptimizerState.for_params(params, main_names, cfg.lr_stage2,
                                         cfg.weight_decay)
    opt_dmad = OptimizerState.for_params(params, dmad_names, cfg.lr_dmad,
                                         cfg.weight_decay)
    log: list[dict] = []
    previous = set_debug_checks(False)
    try:
        _run_epochs(params, train_clips, held, model_cfg, cfg, 2,
                    cfg.epochs_stage2, [opt_main, opt_dmad], log)
    finally:
        set_debug_checks(previous)
    return params, log


def train_two_stage(corpus, model_cfg: ModelConfig, cfg: TrainConfig,
                    out_dir: str | Path | None = None) -> TrainResult:
    """Full schedule; optionally writes checkpoints and the metric log."""
    params1, log1 = train_stage1(corpus, model_cfg, cfg)
    _, held = _split(corpus, cfg.holdout)
    psnr1 = evaluate_psnr(params1, held, model_cfg, 1)
    params2, log2 = train_stage2(corpus, model_cfg, cfg, params1)
    psnr2 = evaluate_psnr(params2, held, model_cfg, 2)
    result = TrainResult(params1, params2, log1 + log2, psnr1, psnr2)
    if out_dir is not None:
        save_training_run(Path(out_dir), result, model_cfg, cfg)
    return result


def save_checkpoint(path: Path, params: ParamStore, stage: int, epoch: int,
                    model_cfg: ModelConfig, cfg: TrainConfig) -> None:
    write_container(path, params)
    manifest = {"stage": str(stage), "epoch": str(epoch),
                "seed": str(cfg.seed), "config_hash": config_hash(model_cfg, cfg)}
    manifest.update(model_cfg.describe())
    write_manifest(path.with_suffix(".txt"), manifest)


def save_training_run(out_dir: Path, result: TrainResult,
                      model_cfg: ModelConfig, cfg: TrainConfig) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    save_checkpoint(out_dir / "stage1.ndtc", result.params_stage1, 1,
                    cfg.epochs_stage1, model_cfg, cfg)
    if result.params_stage2 is not None:
        save_checkpoint(out_dir / "stage2.ndtc", result.params_stage2, 2,
                        cfg.epochs_stage2, model_cfg, cfg)
    with open(out_dir / "metrics.csv", "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=["stage", "epoch", "term", "value"])
        writer.writeheader()
        for row in result.log:
            writer.writerow(row)
