"""Moiré statistics: colour correlation, patch prior, temporal amplitudes,
and the amplitude/phase swap reconstruction.

Amplitude statistics are computed on unshifted spectra; fftshift is for
display only. All procedures are pure functions of their inputs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateInputError, DimensionError, NumericalError
from .tensor import NDTensor
from .tensor.fft import fft2_complex, ifft2_complex

#: Rec.601 luma weights.
_LUMA = np.array([0.299, 0.587, 0.114])


def _as_image(img, channels: int = 3) -> np.ndarray:
    arr = img.array if isinstance(img, NDTensor) else np.asarray(img, dtype=np.float64)
    if arr.ndim != 3 or arr.shape[2] != channels:
        raise DimensionError(f"expected (H, W, {channels}) image, got {arr.shape}")
    return arr


def color_correlation(img) -> float:
    """Mean Pearson correlation over the channel pairs (R,G), (G,B), (R,B)."""
    arr = _as_image(img)
    flat = arr.reshape(-1, 3)
    centered = flat - flat.mean(axis=0)
    norms = np.sqrt((centered ** 2).sum(axis=0))
    if np.any(norms == 0.0):
        dead = "RGB"[int(np.argmin(norms))]
        raise DegenerateInputError(
            f"channel {dead} has zero variance; correlation undefined"
        )
    total = 0.0
    for i, j in ((0, 1), (1, 2), (0, 2)):
        total += float((centered[:, i] * centered[:, j]).sum() / (norms[i] * norms[j]))
    return total / 3.0


def normalized_cc(img, gt) -> float:
    """CC(img) / CC(gt); equals 1 when img is the ground truth itself."""
    denom = color_correlation(gt)
    if denom == 0.0:
        raise DegenerateInputError("ground-truth colour correlation is zero")
    return color_correlation(img) / denom


def raw_to_rgb3(packed) -> np.ndarray:
    """Packed RGGB (H, W, 4) -> (H, W, 3) with the two greens averaged."""
    arr = packed.array if isinstance(packed, NDTensor) else np.asarray(packed)
    if arr.ndim != 3 or arr.shape[2] != 4:
        raise DimensionError(f"expected packed RAW (H, W, 4), got {arr.shape}")
    return np.stack(
        [arr[:, :, 0], 0.5 * (arr[:, :, 1] + arr[:, :, 2]), arr[:, :, 3]], axis=2
    )


# ---------------------------------------------------------------------------
# patch-wise moiré prior
# ---------------------------------------------------------------------------

def _colorfulness(patch: np.ndarray) -> float:
    """Hasler-Süsstrunk statistic on the opponent channels."""
    rg = patch[:, :, 0] - patch[:, :, 1]
    yb = 0.5 * (patch[:, :, 0] + patch[:, :, 1]) - patch[:, :, 2]
    sigma = np.sqrt(rg.var() + yb.var())
    mu = np.sqrt(rg.mean() ** 2 + yb.mean() ** 2)
    return float(sigma + 0.3 * mu)


def _colorfulness_reference() -> float:
    # alternating pure-red / pure-green columns: the full-saturation reference
    ref = np.zeros((2, 2, 3))
    ref[:, 0, 0] = 1.0
    ref[:, 1, 1] = 1.0
    return _colorfulness(ref)


_COLORFULNESS_REF = _colorfulness_reference()


def _hf_energy(patch: np.ndarray) -> float:
    """Fraction of spectral energy outside the central quarter-band of luma."""
    luma = patch @ _LUMA
    spec = fft2_complex(luma)
    energy = spec.real ** 2 + spec.imag ** 2
    total = float(energy.sum())
    if total == 0.0:
        return 0.0
    h, w = luma.shape
    fu = np.minimum(np.arange(h), h - np.arange(h))
    fv = np.minimum(np.arange(w), w - np.arange(w))
    low = (fu[:, None] <= h // 8) & (fv[None, :] <= w // 8)
    return float(1.0 - energy[low].sum() / total)


@dataclass
class PriorReport:
    """Per-patch prior values over the patch grid plus their moments."""

    per_patch: NDTensor
    mean: float
    variance: float


def moire_prior(img, patch: int = 128) -> PriorReport:
    """Patch-wise prior = normalized colorfulness + high-frequency energy.

    The image is tiled into non-overlapping patch x patch cells (partial
    border cells discarded). Both terms lie in [0, 1].
    """
    arr = _as_image(img)
    h, w = arr.shape[:2]
    rows, cols = h // patch, w // patch
    if rows < 1 or cols < 1:
        raise DimensionError(
            f"image {h}x{w} smaller than one {patch}x{patch} patch"
        )
    grid = np.empty((rows, cols))
    for r in range(rows):
        for c in range(cols):
            cell = arr[r * patch:(r + 1) * patch, c * patch:(c + 1) * patch]
            colorful = min(_colorfulness(cell) / _COLORFULNESS_REF, 1.0)
            grid[r, c] = colorful + _hf_energy(cell)
    return PriorReport(
        per_patch=NDTensor(grid),
        mean=float(grid.mean()),
        variance=float(grid.var()),
    )


# ---------------------------------------------------------------------------
# temporal amplitude statistics
# ---------------------------------------------------------------------------

@dataclass
class TemporalReport:
    """Summed absolute amplitude differences for each adjacent frame pair."""

    per_pair: NDTensor
    mean: float
    variance: float


def temporal_stats(clip) -> TemporalReport:
    """Per adjacent pair: sum over all bins and channels of the absolute
    difference of FFT amplitudes; mean/variance over the T-1 pairs."""
    arr = clip.array if isinstance(clip, NDTensor) else np.asarray(clip, dtype=np.float64)
    if arr.ndim != 4:
        raise DimensionError(f"expected clip (T, H, W, C), got {arr.shape}")
    if arr.shape[0] < 2:
        raise DimensionError("temporal statistics need at least two frames")
    amps = np.abs(fft2_complex(arr))
    diffs = np.abs(np.diff(amps, axis=0)).sum(axis=(1, 2, 3))
    return TemporalReport(
        per_pair=NDTensor(diffs),
        mean=float(diffs.mean()),
        variance=float(diffs.var()),
    )


# ---------------------------------------------------------------------------
# amplitude / phase swap
# ---------------------------------------------------------------------------

def amp_phase_swap(a, b, residue_tol: float = 1e-9) -> tuple[NDTensor, NDTensor]:
    """Swap FFT amplitudes between two images of equal shape.

    Returns (amp_b with phase_a, amp_a with phase_b), reconstructed per
    channel. The imaginary residue of each reconstruction is asserted to be
    below ``residue_tol`` before being discarded.
    """
    aa = _as_image(a) if np.ndim(a) == 3 else np.asarray(a, dtype=np.float64)
    bb = b.array if isinstance(b, NDTensor) else np.asarray(b, dtype=np.float64)
    if aa.shape != bb.shape:
        raise DimensionError(f"shape mismatch: {aa.shape} vs {bb.shape}")
    sa = fft2_complex(aa)
    sb = fft2_complex(bb)
    amp_a, amp_b = np.abs(sa), np.abs(sb)
    # unit-phase factors; zero bins keep phase 1 (amplitude there is zero)
    unit_a = np.where(amp_a > 0, sa / np.where(amp_a > 0, amp_a, 1.0), 1.0)
    unit_b = np.where(amp_b > 0, sb / np.where(amp_b > 0, amp_b, 1.0), 1.0)
    first = ifft2_complex(amp_b * unit_a)
    second = ifft2_complex(amp_a * unit_b)
    residue = max(np.abs(first.imag).max(), np.abs(second.imag).max())
    if residue > residue_tol:
        raise NumericalError(
            f"imaginary residue {residue:.3e} exceeds {residue_tol:.1e}"
        )
    return NDTensor(first.real.copy()), NDTensor(second.real.copy())
