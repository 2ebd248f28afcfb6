"""Binary checkpoint: versioned JSON header + little-endian float64 weights.

Layout::

    b"VWSCKPT\\0"            8-byte magic
    uint32 (LE)              header length in bytes
    header                   UTF-8 JSON (format_version, spec, normalization, extra)
    float64[n] (LE)          flat weight vector
"""

import json
import struct
from pathlib import Path

import numpy as np

from ..errors import SchemaError
from ..preprocessing import ZScoreScaler
from .model import ModelSpec, WeightSet, layout

MAGIC = b"VWSCKPT\0"
FORMAT_VERSION = 1


def save_checkpoint(path, spec: ModelSpec, weights: WeightSet, x_scaler=None, y_scaler=None, extra=None):
    header = {
        "format_version": FORMAT_VERSION,
        "spec": spec.to_dict(),
        "n_weights": int(weights.size),
        "normalization": {
            "x": x_scaler.to_dict() if x_scaler is not None else None,
            "y": y_scaler.to_dict() if y_scaler is not None else None,
        },
        "extra": extra or {},
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    data = MAGIC + struct.pack("<I", len(blob)) + blob + weights.vector.astype("<f8").tobytes()
    Path(path).write_bytes(data)


def load_checkpoint(path):
    """Return ``(spec, weights, x_scaler, y_scaler, extra)``."""
    raw = Path(path).read_bytes()
    if raw[:8] != MAGIC:
        raise SchemaError("bad-checkpoint", "magic mismatch")
    (hlen,) = struct.unpack("<I", raw[8:12])
    header = json.loads(raw[12:12 + hlen].decode("utf-8"))
    if header.get("format_version") != FORMAT_VERSION:
        raise SchemaError("bad-checkpoint", f"unsupported format_version {header.get('format_version')}")
    spec = ModelSpec(**header["spec"])
    vec = np.frombuffer(raw[12 + hlen:], dtype="<f8").astype(np.float64)
    if vec.size != header["n_weights"]:
        raise SchemaError("bad-checkpoint", f"expected {header['n_weights']} weights, found {vec.size}")
    weights = WeightSet(layout(spec), vec.copy())
    norm = header["normalization"]
    xs = ZScoreScaler.from_dict(norm["x"]) if norm.get("x") else None
    ys = ZScoreScaler.from_dict(norm["y"]) if norm.get("y") else None
    return spec, weights, xs, ys, header.get("extra", {})
