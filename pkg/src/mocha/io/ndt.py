"""NDT binary tensor format and the named-tensor container.

Single tensor (``.ndt``): magic ``NDT1``, u8 dtype code (0 = f32, 1 = f64),
u8 rank, little-endian u32 extents, then the row-major little-endian payload.

Container (``.ndtc``): magic ``NDTC``, little-endian u32 entry count, u32
header byte length, a UTF-8 name-index header of ``name\\tlr_scale`` lines
(one per entry, in ParamStore order), then the NDT records back to back.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from ..errors import FormatError
from ..tensor import NDTensor, ParamStore

MAGIC = b"NDT1"
CONTAINER_MAGIC = b"NDTC"

_DTYPE_CODES = {np.dtype(np.float32): 0, np.dtype(np.float64): 1}
_CODE_DTYPES = {0: np.dtype("<f4"), 1: np.dtype("<f8")}


def encode_tensor(t: NDTensor) -> bytes:
    code = _DTYPE_CODES[np.dtype(t.dtype)]
    head = MAGIC + struct.pack("<BB", code, t.ndim)
    head += struct.pack(f"<{t.ndim}I", *t.shape)
    payload = np.ascontiguousarray(t.array, dtype=_CODE_DTYPES[code]).tobytes()
    return head + payload


def decode_tensor(buf: bytes, base_offset: int = 0) -> tuple[NDTensor, int]:
    """Decode one tensor; returns (tensor, bytes consumed)."""
    if len(buf) < 6:
        raise FormatError("NDT record truncated before header", base_offset)
    if buf[:4] != MAGIC:
        raise FormatError(f"bad NDT magic {buf[:4]!r}", base_offset)
    code, rank = struct.unpack_from("<BB", buf, 4)
    if code not in _CODE_DTYPES:
        raise FormatError(f"unknown NDT dtype code {code}", base_offset + 4)
    pos = 6
    if len(buf) < pos + 4 * rank:
        raise FormatError("NDT record truncated in extents", base_offset + pos)
    shape = struct.unpack_from(f"<{rank}I", buf, pos)
    pos += 4 * rank
    if any(n == 0 for n in shape):
        raise FormatError(f"zero extent in shape {shape}", base_offset + 6)
    dtype = _CODE_DTYPES[code]
    count = int(np.prod(shape)) if rank else 1
    nbytes = count * dtype.itemsize
    if len(buf) < pos + nbytes:
        raise FormatError(
            f"NDT payload truncated: need {nbytes} bytes", base_offset + pos
        )
    flat = np.frombuffer(buf, dtype=dtype, count=count, offset=pos)
    pos += nbytes
    arr = flat.reshape(shape).astype(dtype.newbyteorder("="))
    if not np.all(np.isfinite(arr)):
        raise FormatError("NDT payload contains non-finite values", base_offset)
    return NDTensor(arr, check=False), pos


def write_tensor(path: str | Path, t: NDTensor) -> None:
    Path(path).write_bytes(encode_tensor(t))


def read_tensor(path: str | Path) -> NDTensor:
    buf = Path(path).read_bytes()
    tensor, used = decode_tensor(buf)
    if used != len(buf):
        raise FormatError(f"{path}: trailing bytes after tensor", used)
    return tensor


def write_container(path: str | Path, params: ParamStore) -> None:
    lines = []
    blobs = []
    for name, tensor in params.items():
        lines.append(f"{name}\t{params.lr_scale(name)!r}")
        blobs.append(encode_tensor(tensor))
    header = ("\n".join(lines) + "\n").encode("utf-8") if lines else b""
    out = CONTAINER_MAGIC + struct.pack("<II", len(blobs), len(header)) + header
    Path(path).write_bytes(out + b"".join(blobs))


def read_container(path: str | Path) -> ParamStore:
    buf = Path(path).read_bytes()
    if len(buf) < 12 or buf[:4] != CONTAINER_MAGIC:
        raise FormatError(f"{path}: bad container magic", 0)
    count, header_len = struct.unpack_from("<II", buf, 4)
    pos = 12
    if len(buf) < pos + header_len:
        raise FormatError(f"{path}: truncated header", pos)
    header = buf[pos: pos + header_len].decode("utf-8")
    pos += header_len
    entries = [line for line in header.splitlines() if line]
    if len(entries) != count:
        raise FormatError(
            f"{path}: header lists {len(entries)} names, expected {count}", 12
        )
    params = ParamStore()
    for line in entries:
        try:
            name, scale = line.split("\t")
            scale = float(scale)
        except ValueError:
            raise FormatError(f"{path}: bad header line {line!r}", 12) from None
        tensor, used = decode_tensor(buf[pos:], pos)
        pos += used
        params.add(name, tensor, scale)
    if pos != len(buf):
        raise FormatError(f"{path}: trailing bytes after last tensor", pos)
    return params
