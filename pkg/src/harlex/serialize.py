"""Base64 array packing shared by model and feature-builder persistence.

Arrays travel as little-endian raw bytes inside JSON, so round-trips are
bit-exact regardless of platform.
"""

from __future__ import annotations

import base64

import numpy as np

__all__ = ["pack_array", "unpack_array"]


def pack_array(a: np.ndarray) -> dict:
    a = np.asarray(a)
    kind = "i8" if a.dtype.kind in "iu" else "f8"
    raw = a.astype("<" + kind).tobytes()
    return {
        "dtype": kind,
        "shape": list(a.shape),
        "data": base64.b64encode(raw).decode("ascii"),
    }


def unpack_array(d: dict) -> np.ndarray:
    raw = base64.b64decode(d["data"])
    a = np.frombuffer(raw, dtype="<" + d["dtype"])
    target = np.int64 if d["dtype"] == "i8" else np.float64
    return a.reshape(d["shape"]).astype(target)
