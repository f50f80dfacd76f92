from .clips import (
    SynthParams,
    VideoClipPair,
    content_margin,
    jittered_poses,
    make_clip_pair,
    synth_clip,
    synth_corpus,
)
from .content import content_video
from .isp import (
    IspParams,
    demosaic_bilinear,
    gamma_decode,
    gamma_encode,
    isp_pipeline,
    pack_rggb,
    remosaic,
    unpack_rggb,
)
from .screen import CapturePose, capture_cfa, render_screen

__all__ = [
    "CapturePose",
    "IspParams",
    "SynthParams",
    "VideoClipPair",
    "capture_cfa",
    "content_margin",
    "content_video",
    "demosaic_bilinear",
    "gamma_decode",
    "gamma_encode",
    "isp_pipeline",
    "jittered_poses",
    "make_clip_pair",
    "pack_rggb",
    "remosaic",
    "render_screen",
    "synth_clip",
    "synth_corpus",
    "unpack_rggb",
]
