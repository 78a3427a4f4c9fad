"""Binary raster formats: PGM (P5) renders and the HMAP exchange format.

HMAP layout, all integers little-endian:
  magic "HMAP" | u8 version=1 | u8 dtype (0 = f32 heatmap, 1 = u8 mask)
  | u16 reserved=0 | u32 rows | u32 cols | row-major payload (f32 LE or u8).
"""

from __future__ import annotations

import os
import struct
import tempfile
from pathlib import Path

import numpy as np

from .errors import HmapFormatError, InvalidInputError

HMAP_MAGIC = b"HMAP"
HMAP_VERSION = 1
HMAP_DTYPE_HEATMAP = 0
HMAP_DTYPE_MASK = 1

_HEADER = struct.Struct("<4sBBHII")


def atomic_write_bytes(path: str | Path, data: bytes) -> None:
    """Write via a temp file in the same directory, then rename."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or Path("."), suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def render_pgm(raster: np.ndarray, path: str | Path) -> None:
    """Write a min-max normalized grayscale P5 image.

    Row 0 of the raster (lowest frequency) ends up at the bottom of the
    image.  A constant raster renders as all zeros.
    """
    raster = np.asarray(raster, dtype=np.float64)
    if raster.ndim != 2 or raster.size == 0:
        raise InvalidInputError(f"expected a non-empty 2-D raster, got shape {raster.shape}")
    lo, hi = raster.min(), raster.max()
    if hi > lo:
        pixels = np.round((raster - lo) / (hi - lo) * 255.0).astype(np.uint8)
    else:
        pixels = np.zeros(raster.shape, dtype=np.uint8)
    pixels = pixels[::-1]  # low frequencies at the bottom
    header = f"P5\n{raster.shape[1]} {raster.shape[0]}\n255\n".encode("ascii")
    atomic_write_bytes(path, header + pixels.tobytes())


def read_pgm(path: str | Path) -> np.ndarray:
    """Read a binary P5 image as a uint8 array in file orientation (top row first)."""
    data = Path(path).read_bytes()
    if not data.startswith(b"P5"):
        raise InvalidInputError(f"{path}: not a binary PGM (P5) file")
    # Header: magic, width, height, maxval; separated by whitespace, '#' comments allowed.
    pos, fields = 2, []
    while len(fields) < 3:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos] != 0x0A:
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        fields.append(data[start:pos])
    width, height, maxval = (int(f) for f in fields)
    if maxval != 255:
        raise InvalidInputError(f"{path}: expected maxval 255, got {maxval}")
    pos += 1  # single whitespace byte after maxval
    payload = data[pos : pos + width * height]
    if len(payload) < width * height:
        raise InvalidInputError(f"{path}: payload shorter than width x height")
    return np.frombuffer(payload, dtype=np.uint8).reshape(height, width)


def write_hmap(path: str | Path, data: np.ndarray) -> None:
    """Write a float raster (dtype f32) or a boolean mask (dtype u8)."""
    data = np.asarray(data)
    if data.ndim != 2 or data.size == 0:
        raise InvalidInputError(f"expected a non-empty 2-D raster, got shape {data.shape}")
    if data.dtype == np.bool_:
        dtype, payload = HMAP_DTYPE_MASK, data.astype(np.uint8).tobytes()
    else:
        dtype, payload = HMAP_DTYPE_HEATMAP, data.astype("<f4").tobytes()
    header = _HEADER.pack(HMAP_MAGIC, HMAP_VERSION, dtype, 0, data.shape[0], data.shape[1])
    atomic_write_bytes(path, header + payload)


def read_hmap(path: str | Path) -> tuple[np.ndarray, str]:
    """Read an HMAP file.

    Returns (array, kind) with kind "heatmap" (float64 array) or "mask"
    (bool array).  The payload round-trips bit-exactly through write_hmap.
    """
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise HmapFormatError(f"{path}: header truncated ({len(raw)} bytes)")
    magic, version, dtype, reserved, rows, cols = _HEADER.unpack_from(raw)
    if magic != HMAP_MAGIC:
        raise HmapFormatError(f"{path}: bad magic {magic!r}")
    if version != HMAP_VERSION:
        raise HmapFormatError(f"{path}: unsupported version {version}")
    if reserved != 0:
        raise HmapFormatError(f"{path}: reserved field must be 0, got {reserved}")
    if rows == 0 or cols == 0:
        raise HmapFormatError(f"{path}: zero dimension rows={rows} cols={cols}")
    payload = raw[_HEADER.size :]
    if dtype == HMAP_DTYPE_HEATMAP:
        expected = rows * cols * 4
        if len(payload) < expected:
            raise HmapFormatError(f"{path}: payload shorter than rows x cols (f32)")
        arr = np.frombuffer(payload[:expected], dtype="<f4").reshape(rows, cols)
        return arr.astype(np.float64), "heatmap"
    if dtype == HMAP_DTYPE_MASK:
        expected = rows * cols
        if len(payload) < expected:
            raise HmapFormatError(f"{path}: payload shorter than rows x cols")
        arr = np.frombuffer(payload[:expected], dtype=np.uint8).reshape(rows, cols)
        return arr.astype(bool), "mask"
    raise HmapFormatError(f"{path}: unknown dtype code {dtype}")
