"""8-bit PPM (P6) previews and little-endian PFM float images."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from ..errors import DimensionError, FormatError


def write_ppm(path: str | Path, image: np.ndarray) -> None:
    """Write an (H, W, 3) image in [0, 1] as binary P6."""
    arr = np.asarray(image, dtype=np.float64)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise DimensionError(f"PPM needs (H, W, 3), got {arr.shape}")
    quant = np.clip(np.rint(arr * 255.0), 0, 255).astype(np.uint8)
    h, w = arr.shape[:2]
    with open(path, "wb") as fh:
        fh.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
        fh.write(quant.tobytes())


def read_ppm(path: str | Path) -> np.ndarray:
    buf = Path(path).read_bytes()
    if not buf.startswith(b"P6"):
        raise FormatError(f"{path}: not a P6 PPM", 0)
    fields, pos = [], 2
    while len(fields) < 3:
        while pos < len(buf) and buf[pos: pos + 1].isspace():
            pos += 1
        if buf[pos: pos + 1] == b"#":
            while pos < len(buf) and buf[pos] != 0x0A:
                pos += 1
            continue
        start = pos
        while pos < len(buf) and not buf[pos: pos + 1].isspace():
            pos += 1
        fields.append(buf[start:pos])
    pos += 1  # single whitespace after maxval
    w, h, maxval = (int(f) for f in fields)
    need = w * h * 3
    if len(buf) < pos + need:
        raise FormatError(f"{path}: truncated pixel data", pos)
    pixels = np.frombuffer(buf, dtype=np.uint8, count=need, offset=pos)
    return pixels.reshape(h, w, 3).astype(np.float64) / maxval


def write_pfm(path: str | Path, image: np.ndarray) -> None:
    """Write (H, W) or (H, W, 3) float data as little-endian PFM."""
    arr = np.asarray(image, dtype=np.float32)
    if arr.ndim == 2:
        header = "Pf"
    elif arr.ndim == 3 and arr.shape[2] == 3:
        header = "PF"
    else:
        raise DimensionError(f"PFM needs (H, W) or (H, W, 3), got {arr.shape}")
    h, w = arr.shape[:2]
    with open(path, "wb") as fh:
        fh.write(f"{header}\n{w} {h}\n-1.0\n".encode("ascii"))
        fh.write(arr[::-1].tobytes())  # PFM rows run bottom to top


def read_pfm(path: str | Path) -> np.ndarray:
    buf = Path(path).read_bytes()
    try:
        head, dims, scale, rest = buf.split(b"\n", 3)
        w, h = (int(v) for v in dims.split())
        scale = float(scale)
    except ValueError:
        raise FormatError(f"{path}: malformed PFM header", 0) from None
    if head not in (b"Pf", b"PF"):
        raise FormatError(f"{path}: not a PFM file", 0)
    if scale > 0:
        raise FormatError(f"{path}: big-endian PFM unsupported", 3)
    channels = 3 if head == b"PF" else 1
    need = w * h * channels
    data = np.frombuffer(rest, dtype="<f4", count=need)
    if data.size < need:
        raise FormatError(f"{path}: truncated PFM payload", len(buf) - len(rest))
    shape = (h, w, 3) if channels == 3 else (h, w)
    return data.reshape(shape)[::-1].astype(np.float64)
