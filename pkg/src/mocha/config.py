"""Run configuration: flat key=value schema shared by every command.

Values come from (in order of precedence) command-line ``--set key=value``
overrides, then a ``--config`` file, then the defaults below. Unknown keys
are rejected, and every run can serialize its fully-resolved configuration.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from .errors import ConfigError
from .io.manifest import read_manifest
from .model import ModelConfig
from .synth import IspParams, SynthParams
from .train import GroupingParams, LossConfig, LossWeights, TrainConfig, WnnmParams

_SCHEMA: dict[str, tuple[type, object]] = {
    # model
    "channels": (int, 32),
    "n_m": (int, 4),
    "dmad_heads": (int, 1),
    "n_r": (int, 4),
    "n_s": (int, 5),
    "window_t": (int, 2),
    "window_k": (int, 7),
    "heads": (int, 4),
    "mlp_ratio": (int, 2),
    # losses
    "lambda_percept": (float, 0.01),
    "lambda_pd": (float, 1.0),
    "lambda_mp": (float, 1.0),
    "lambda_mc": (float, 0.5),
    "wnnm_c": (float, 1.0),
    "wnnm_eps": (float, 1e-6),
    "mp_patch": (int, 8),
    "mp_stride": (int, 4),
    "mp_k": (int, 8),
    "mp_search": (int, 16),
    "mp_max_groups": (int, 64),
    # training
    "epochs_stage1": (int, 30),
    "epochs_stage2": (int, 30),
    "lr_stage1": (float, 1e-4),
    "lr_stage2": (float, 1e-5),
    "lr_dmad": (float, 1e-4),
    "stad_lr_mode": (str, "compose"),
    "weight_decay": (float, 0.0),
    "holdout": (int, 1),
    # synthesis
    "clips": (int, 8),
    "frames": (int, 3),
    "raw_h": (int, 32),
    "raw_w": (int, 32),
    "pitch": (int, 3),
    "scale": (float, 0.87),
    "jitter_px": (float, 1.0),
    "jitter_rot": (float, 0.01),
    "jitter_scale": (float, 0.01),
    "content": (str, "mix"),
    "drift_y": (int, 0),
    "drift_x": (int, 0),
    "wb_r": (float, 1.0),
    "wb_g": (float, 1.0),
    "wb_b": (float, 1.0),
    "sharpen": (float, 0.5),
    # shared
    "seed": (int, 0),
}


@dataclass
class RunConfig:
    values: dict[str, object]

    @classmethod
    def load(cls, path: str | Path | None = None,
             overrides: list[str] | None = None) -> "RunConfig":
        values = {k: default for k, (_, default) in _SCHEMA.items()}
        if path is not None:
            for key, raw in read_manifest(path).items():
                values[key] = _parse(key, raw)
        for pair in overrides or []:
            if "=" not in pair:
                raise ConfigError(f"override {pair!r} is not key=value")
            key, raw = pair.split("=", 1)
            values[key.strip()] = _parse(key.strip(), raw.strip())
        return cls(values)

    def __getitem__(self, key: str):
        if key not in _SCHEMA:
            raise ConfigError(f"unknown config key {key!r}")
        return self.values[key]

    def resolved(self) -> dict[str, str]:
        return {k: str(self.values[k]) for k in _SCHEMA}

    # -- builders ------------------------------------------------------------

    def model_config(self) -> ModelConfig:
        return ModelConfig(
            channels=self["channels"],
            n_m=self["n_m"],
            dmad_heads=self["dmad_heads"],
            n_r=self["n_r"],
            n_s=self["n_s"],
            window=(self["window_t"], self["window_k"], self["window_k"]),
            heads=self["heads"],
            mlp_ratio=self["mlp_ratio"],
        )

    def loss_config(self) -> LossConfig:
        return LossConfig(
            weights=LossWeights(
                percept=self["lambda_percept"],
                pd=self["lambda_pd"],
                mp=self["lambda_mp"],
                mc=self["lambda_mc"],
            ),
            grouping=GroupingParams(
                patch=self["mp_patch"],
                stride=self["mp_stride"],
                k=self["mp_k"],
                search=self["mp_search"],
                max_groups=self["mp_max_groups"],
            ),
            wnnm=WnnmParams(c_w=self["wnnm_c"], eps=self["wnnm_eps"]),
        )

    def train_config(self) -> TrainConfig:
        return TrainConfig(
            epochs_stage1=self["epochs_stage1"],
            epochs_stage2=self["epochs_stage2"],
            lr_stage1=self["lr_stage1"],
            lr_stage2=self["lr_stage2"],
            lr_dmad=self["lr_dmad"],
            stad_lr_mode=self["stad_lr_mode"],
            weight_decay=self["weight_decay"],
            seed=self["seed"],
            holdout=self["holdout"],
            loss=self.loss_config(),
        )

    def synth_params(self) -> SynthParams:
        return SynthParams(
            frames=self["frames"],
            raw_h=self["raw_h"],
            raw_w=self["raw_w"],
            pitch=self["pitch"],
            scale=self["scale"],
            jitter_px=self["jitter_px"],
            jitter_rot=self["jitter_rot"],
            jitter_scale=self["jitter_scale"],
            content_kind=self["content"],
            drift=(self["drift_y"], self["drift_x"]),
            isp=IspParams(
                wb_gains=(self["wb_r"], self["wb_g"], self["wb_b"]),
                sharpen_strength=self["sharpen"],
            ),
        )


def _parse(key: str, raw: str):
    if key not in _SCHEMA:
        raise ConfigError(f"unknown config key {key!r}")
    kind, _ = _SCHEMA[key]
    try:
        if kind is int:
            return int(raw)
        if kind is float:
            return float(raw)
        return str(raw)
    except ValueError:
        raise ConfigError(f"config key {key!r}: cannot parse {raw!r} as {kind.__name__}") from None
