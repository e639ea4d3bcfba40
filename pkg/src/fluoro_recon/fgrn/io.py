"""Binary model files.

Layout, all little-endian::

    b"FGRN" | uint32 version | uint32 descriptor length | descriptor (UTF-8 JSON)
    | float64 parameter blocks in descriptor order

The descriptor lists the architecture and every parameter's name and shape;
the same JSON is written to ``<model>.json`` for inspection.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from ..errors import ShapeMismatch
from .model import Architecture, FgrnModel

MAGIC = b"FGRN"
FORMAT_VERSION = 1


def descriptor(model: FgrnModel, extra: dict | None = None) -> dict:
    d = {
        "format_version": FORMAT_VERSION,
        "architecture": model.arch.to_dict(),
        "parameters": [{"name": k, "shape": list(v.shape)} for k, v in model.params.items()],
    }
    if extra:
        d["metadata"] = extra
    return d


def encode_model(model: FgrnModel, extra: dict | None = None) -> bytes:
    desc = json.dumps(descriptor(model, extra), sort_keys=True).encode()
    parts = [MAGIC, struct.pack("<II", FORMAT_VERSION, len(desc)), desc]
    parts += [np.ascontiguousarray(v, dtype="<f8").tobytes() for v in model.params.values()]
    return b"".join(parts)


def decode_model(data: bytes) -> tuple[FgrnModel, dict]:
    if data[:4] != MAGIC:
        raise ValueError("not an FGRN model file")
    version, n = struct.unpack_from("<II", data, 4)
    if version != FORMAT_VERSION:
        raise ValueError(f"unsupported model format version {version}")
    desc = json.loads(data[12 : 12 + n].decode())
    arch = Architecture.from_dict(desc["architecture"])
    offset = 12 + n
    params = {}
    for entry in desc["parameters"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape))
        if offset + 8 * count > len(data):
            raise ShapeMismatch("model file is truncated")
        params[entry["name"]] = np.frombuffer(data, dtype="<f8", count=count, offset=offset).reshape(shape).astype(np.float64)
        offset += 8 * count
    if offset != len(data):
        raise ShapeMismatch("trailing bytes after parameter blocks")
    return FgrnModel(arch, params), desc.get("metadata", {})


def save_model(path, model: FgrnModel, extra: dict | None = None) -> None:
    path = Path(path)
    path.write_bytes(encode_model(model, extra))
    Path(str(path) + ".json").write_text(json.dumps(descriptor(model, extra), indent=2, sort_keys=True) + "\n")


def load_model(path) -> FgrnModel:
    return decode_model(Path(path).read_bytes())[0]


def load_model_with_metadata(path) -> tuple[FgrnModel, dict]:
    return decode_model(Path(path).read_bytes())
