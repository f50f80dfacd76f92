"""Minimal deterministic tensor layer with tape-based reverse-mode autodiff."""

from .core import (
    NDTensor,
    ParamStore,
    Tape,
    as_ndtensor,
    backward,
    debug_checks_enabled,
    he_uniform,
    set_debug_checks,
    wrap_result,
)
from .gradcheck import GradCheckReport, grad_check
from .ops import ComplexSpectrum

__all__ = [
    "NDTensor",
    "ParamStore",
    "Tape",
    "ComplexSpectrum",
    "GradCheckReport",
    "as_ndtensor",
    "backward",
    "debug_checks_enabled",
    "grad_check",
    "he_uniform",
    "set_debug_checks",
    "wrap_result",
]
