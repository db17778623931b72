"""FSTACK frame-stack files and PGM export.

Layout (all little-endian, no padding):

* bytes 0-7: magic ``FSTK1\\0\\0\\0``
* four u32 fields: width, height, frame_count, dtype
  (0 = IEEE-754 binary32, 1 = unsigned 16-bit)
* frames in order, each row-major.
"""

from __future__ import annotations

import struct

import numpy as np

from .errors import ParameterError

MAGIC = b"FSTK1\0\0\0"
_HEADER = struct.Struct("<4I")
_DTYPES = {0: np.dtype("<f4"), 1: np.dtype("<u2")}
_CODES = {np.dtype(np.float32): 0, np.dtype(np.uint16): 1}


def write_fstack(path, frames: np.ndarray) -> None:
    """Write a (frame_count, height, width) array as an FSTACK file.

    The array dtype must be float32 or uint16; a single 2-D frame is
    accepted and stored as a one-frame stack.
    """
    frames = np.asarray(frames)
    if frames.ndim == 2:
        frames = frames[None]
    if frames.ndim != 3:
        raise ParameterError(f"expected a 2-D frame or 3-D stack, got shape {frames.shape}")
    code = _CODES.get(np.dtype(frames.dtype))
    if code is None:
        raise ParameterError(f"unsupported dtype {frames.dtype}; use float32 or uint16")
    count, height, width = frames.shape
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(_HEADER.pack(width, height, count, code))
        fh.write(np.ascontiguousarray(frames, dtype=_DTYPES[code]).tobytes())


def read_fstack(path) -> np.ndarray:
    """Read an FSTACK file back as a (frame_count, height, width) array."""
    with open(path, "rb") as fh:
        magic = fh.read(8)
        if magic != MAGIC:
            raise ParameterError(f"not an FSTACK file: bad magic {magic!r}")
        header = fh.read(_HEADER.size)
        if len(header) != _HEADER.size:
            raise ParameterError("truncated FSTACK header")
        width, height, count, code = _HEADER.unpack(header)
        if code not in _DTYPES:
            raise ParameterError(f"unknown FSTACK dtype code {code}")
        dtype = _DTYPES[code]
        expected = width * height * count * dtype.itemsize
        data = fh.read()
    if len(data) != expected:
        raise ParameterError(
            f"FSTACK payload is {len(data)} bytes, header promises {expected}"
        )
    return np.frombuffer(data, dtype=dtype).reshape(count, height, width).copy()


def write_pgm(path, frame: np.ndarray) -> None:
    """Export one frame as a 16-bit binary PGM (P5), scaled to full range."""
    frame = np.asarray(frame, dtype=float)
    if frame.ndim != 2:
        raise ParameterError(f"PGM export needs a single 2-D frame, got shape {frame.shape}")
    lo, hi = float(frame.min()), float(frame.max())
    scale = 65535.0 / (hi - lo) if hi > lo else 0.0
    pix = np.rint((frame - lo) * scale).astype(">u2")
    h, w = frame.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n65535\n".encode("ascii"))
        fh.write(pix.tobytes())
