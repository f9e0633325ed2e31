"""Binary tensor file format used across the pipeline (.msmt files).

Layout: magic ``MSMT``, version byte 0x01, dtype byte (0x01 = float32
little-endian), rank byte, rank x uint32 little-endian extents, then the
row-major float payload. Round-trips are bit-exact for float32 data.
"""

from __future__ import annotations

import os
import struct
from pathlib import Path

import numpy as np

__all__ = ["write_tensor", "read_tensor", "TensorFileError"]

MAGIC = b"MSMT"
VERSION = 0x01
DTYPE_F32 = 0x01


class TensorFileError(IOError):
    """Corrupt or unsupported .msmt file."""


def write_tensor(path: str | Path, array: np.ndarray) -> None:
    """Write ``array`` as a float32 .msmt file (atomic: temp + rename)."""
    arr = np.ascontiguousarray(array, dtype=np.float32)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if arr.ndim > 255:
        raise TensorFileError("rank exceeds format limit (255)")
    path = Path(path)
    header = MAGIC + struct.pack("<BBB", VERSION, DTYPE_F32, arr.ndim)
    header += struct.pack(f"<{arr.ndim}I", *arr.shape)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(header)
        fh.write(arr.astype("<f4", copy=False).tobytes(order="C"))
    os.replace(tmp, path)


def read_tensor(path: str | Path) -> np.ndarray:
    """Read an .msmt file back into a float32 array."""
    path = Path(path)
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 7 or blob[:4] != MAGIC:
        raise TensorFileError(f"{path}: not an MSMT tensor file (bad magic)")
    version, dtype, rank = struct.unpack_from("<BBB", blob, 4)
    if version != VERSION:
        raise TensorFileError(f"{path}: unsupported version {version:#x}")
    if dtype != DTYPE_F32:
        raise TensorFileError(f"{path}: unsupported dtype byte {dtype:#x}")
    offset = 7
    if len(blob) < offset + 4 * rank:
        raise TensorFileError(f"{path}: truncated header")
    shape = struct.unpack_from(f"<{rank}I", blob, offset)
    offset += 4 * rank
    count = int(np.prod(shape)) if rank else 1
    expected = offset + 4 * count
    if len(blob) != expected:
        raise TensorFileError(
            f"{path}: payload size mismatch (got {len(blob) - offset} bytes, "
            f"expected {4 * count})"
        )
    data = np.frombuffer(blob, dtype="<f4", count=count, offset=offset)
    return data.reshape(shape).astype(np.float32, copy=True)
