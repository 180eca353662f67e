"""RSF1 binary field format.

Layout: magic ``RSF1``, three little-endian uint32 axis sizes, one
little-endian float64 box_length, then row-major little-endian float64
payload — plain values for real fields, interleaved re/im pairs for complex
fields.  Realness is inferred from the payload size on read.
"""

from __future__ import annotations

import struct

import numpy as np

MAGIC = b"RSF1"
_HEADER = struct.Struct("<4sIIId")

__all__ = ["write_field", "read_field", "MAGIC"]


def write_field(path, values: np.ndarray, box_length: float) -> None:
    arr = np.ascontiguousarray(values)
    if arr.ndim != 3:
        raise ValueError("RSF1 stores 3-d fields")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, *arr.shape, float(box_length)))
        if np.iscomplexobj(arr):
            flat = np.empty(2 * arr.size, dtype="<f8")
            flat[0::2] = arr.real.ravel()
            flat[1::2] = arr.imag.ravel()
        else:
            flat = arr.astype("<f8").ravel()
        fh.write(flat.tobytes())


def read_field(path):
    """Returns (values, box_length); values real or complex per payload size."""
    with open(path, "rb") as fh:
        header = fh.read(_HEADER.size)
        if len(header) != _HEADER.size:
            raise ValueError(f"{path}: truncated RSF1 header")
        magic, nx, ny, nz, box_length = _HEADER.unpack(header)
        if magic != MAGIC:
            raise ValueError(f"{path}: bad magic {magic!r}, expected {MAGIC!r}")
        payload = np.frombuffer(fh.read(), dtype="<f8")
    count = nx * ny * nz
    if payload.size == count:
        values = payload.reshape(nx, ny, nz).copy()
    elif payload.size == 2 * count:
        values = (payload[0::2] + 1j * payload[1::2]).reshape(nx, ny, nz)
    else:
        raise ValueError(
            f"{path}: payload has {payload.size} floats, expected {count} (real) "
            f"or {2 * count} (complex)"
        )
    return values, box_length
