"""Paired clean/moiré clip assembly and corpus generation."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigError, DimensionError
from ..tensor import NDTensor
from . import content as content_mod
from .isp import IspParams, gamma_decode, isp_pipeline, pack_rggb, remosaic
from .screen import CapturePose, capture_cfa, render_screen


@dataclass
class SynthParams:
    frames: int = 3
    raw_h: int = 32
    raw_w: int = 32
    pitch: int = 3
    scale: float = 0.87
    jitter_px: float = 1.0
    jitter_rot: float = 0.01
    jitter_scale: float = 0.01
    content_kind: str = "mix"
    drift: tuple[int, int] = (0, 0)
    isp: IspParams = field(default_factory=IspParams)


@dataclass
class VideoClipPair:
    """Aligned clean/moiré clip in sRGB and packed-RAW domains.

    sRGB extents are exactly twice the packed-RAW extents; every sample
    lies in [0, 1]; identical (seed, params) reproduce the clip bit-exactly.
    """

    clean_rgb: NDTensor        # (T, 2H, 2W, 3)
    moire_rgb: NDTensor        # (T, 2H, 2W, 3)
    moire_raw: NDTensor        # (T, H, W, 4)
    pseudo_clean_raw: NDTensor  # (T, H, W, 4)
    meta: dict = field(default_factory=dict)

    def validate(self) -> None:
        t, h2, w2, _ = self.clean_rgb.shape
        if self.moire_rgb.shape != (t, h2, w2, 3):
            raise DimensionError("clean/moire sRGB shapes disagree")
        if self.moire_raw.shape != (t, h2 // 2, w2 // 2, 4):
            raise DimensionError("RAW extents must be half the sRGB extents")
        if self.pseudo_clean_raw.shape != self.moire_raw.shape:
            raise DimensionError("RAW clip shapes disagree")
        for name in ("clean_rgb", "moire_rgb", "moire_raw", "pseudo_clean_raw"):
            arr = getattr(self, name).array
            if arr.min() < 0.0 or arr.max() > 1.0:
                raise ConfigError(f"{name} has samples outside [0, 1]")


def content_margin(sensor_h: int, sensor_w: int, poses: list[CapturePose]) -> int:
    """Content-pixel margin needed so every posed sample stays on the field."""
    radius = math.hypot(sensor_h, sensor_w) / 2.0
    worst = 0.0
    for pose in poses:
        # rotation sweep + translation + footprint stretch beyond the sensor
        sweep = abs(pose.rotation) * radius
        stretch = (max(pose.scale, 1.0) - 1.0) * radius
        shift = max(abs(pose.translation[0]), abs(pose.translation[1]))
        worst = max(worst, pose.scale * (sweep + shift + 1.0) + stretch)
    return int(math.ceil(worst)) + 2


def jittered_poses(
    rng: np.random.Generator, params: SynthParams
) -> list[CapturePose]:
    poses = []
    for _ in range(params.frames):
        tx, ty = rng.uniform(-params.jitter_px, params.jitter_px, size=2)
        rot = rng.uniform(-params.jitter_rot, params.jitter_rot)
        sc = params.scale * (1.0 + rng.uniform(-params.jitter_scale, params.jitter_scale))
        poses.append(CapturePose((tx, ty), rot, sc))
    return poses


def make_clip_pair(
    content_video: np.ndarray,
    poses: list[CapturePose],
    seed: int,
    pitch: int = 3,
    isp: IspParams = IspParams(),
    margin: int | None = None,
) -> VideoClipPair:
    """Assemble the four aligned clips from sRGB content and per-frame poses.

    Per frame: the content is linearized and rendered as stripe sub-pixels,
    captured through the posed Bayer mosaic, then developed by the ISP. The
    clean sRGB clip is the central content crop; pseudo-clean RAW mirrors
    the dataset construction (inverse gamma + remosaic of clean sRGB).

    ``margin`` is the content border (in content pixels) kept outside the
    sensor; when omitted it is solved from the poses.
    """
    content_video = np.asarray(content_video, dtype=np.float64)
    if content_video.ndim != 4 or content_video.shape[3] != 3:
        raise DimensionError(
            f"content video must be (T, H, W, 3), got {content_video.shape}"
        )
    frames = content_video.shape[0]
    if frames < 3:
        raise DimensionError(f"clips need T >= 3 frames, got {frames}")
    if len(poses) != frames:
        raise DimensionError("one CapturePose per frame required")

    ch, cw = content_video.shape[1:3]
    if margin is None:
        # margin depends on the sensor size, which depends on the margin
        margin = content_margin(ch, cw, poses)
        for _ in range(4):
            needed = content_margin(ch - 2 * margin, cw - 2 * margin, poses)
            if needed >= margin:
                break
            margin = needed
    sensor_h, sensor_w = ch - 2 * margin, cw - 2 * margin
    if sensor_h < 2 or sensor_w < 2 or sensor_h % 2 or sensor_w % 2:
        raise DimensionError(
            f"content {ch}x{cw} leaves no even sensor area after margin {margin}"
        )

    clean_rgb = np.empty((frames, sensor_h, sensor_w, 3))
    moire_rgb = np.empty((frames, sensor_h, sensor_w, 3))
    moire_raw = np.empty((frames, sensor_h // 2, sensor_w // 2, 4))
    pseudo_raw = np.empty_like(moire_raw)
    for t in range(frames):
        linear = gamma_decode(content_video[t])
        fld = render_screen(linear, pitch)
        mosaic = capture_cfa(fld, poses[t], sensor_h, sensor_w, pitch)
        moire_raw[t] = pack_rggb(np.clip(mosaic, 0.0, 1.0))
        moire_rgb[t] = isp_pipeline(mosaic, isp)
        crop = content_video[t, margin: margin + sensor_h, margin: margin + sensor_w]
        clean_rgb[t] = crop
        pseudo_raw[t] = pack_rggb(np.clip(remosaic(gamma_decode(crop)), 0.0, 1.0))

    pair = VideoClipPair(
        clean_rgb=NDTensor(clean_rgb),
        moire_rgb=NDTensor(moire_rgb),
        moire_raw=NDTensor(moire_raw),
        pseudo_clean_raw=NDTensor(pseudo_raw),
        meta={
            "seed": seed,
            "pitch": pitch,
            "margin": margin,
            "poses": [p.as_tuple() for p in poses],
        },
    )
    pair.validate()
    return pair


def synth_clip(seed: int, params: SynthParams) -> VideoClipPair:
    """One deterministic clip pair from a seed and synthesis parameters."""
    rng = np.random.default_rng(seed)
    probe = [CapturePose((params.jitter_px, params.jitter_px),
                         params.jitter_rot,
                         min(params.scale * (1 + params.jitter_scale), 1.99))]
    margin = content_margin(2 * params.raw_h, 2 * params.raw_w, probe)
    ch = 2 * params.raw_h + 2 * margin
    cw = 2 * params.raw_w + 2 * margin
    video = content_mod.content_video(
        rng, params.frames, ch, cw, params.content_kind, params.drift
    )
    poses = jittered_poses(rng, params)
    return make_clip_pair(video, poses, seed, params.pitch, params.isp, margin)


def synth_corpus(seed: int, clips: int, params: SynthParams) -> list[VideoClipPair]:
    """Deterministic corpus: clip i uses child seed (seed, i)."""
    out = []
    for i in range(clips):
        child = int(np.random.SeedSequence([seed, i]).generate_state(1)[0])
        out.append(synth_clip(child, params))
    return out
