"""Binary model checkpoints.

Layout: magic ``RGCK``, format version (u32 LE), header length (u32 LE),
JSON header (architecture, normalization constants, sample rate, tensor
order), then one record per tensor: name length (u16 LE), UTF-8 name,
ndim (u8), dims (u32 LE each), raw little-endian float32 data. Running
batch-norm statistics are stored alongside weights so inference is
self-contained.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .. import INTERFACE_VERSION
from ..env import NormalizationConfig
from ..errors import CheckpointError
from .model import GanModel, ModelConfig

MAGIC = b"RGCK"
FORMAT_VERSION = 1


@dataclass
class LoadedCheckpoint:
    model: GanModel
    normalization: NormalizationConfig
    sample_rate: int


def save_checkpoint(
    model: GanModel, normalization: NormalizationConfig, sample_rate: int, path
) -> None:
    tensors = model.snapshot()
    names = sorted(tensors)
    header = {
        "interface_version": INTERFACE_VERSION,
        "model": model.config.to_dict(),
        "normalization": normalization.to_dict(),
        "sample_rate": int(sample_rate),
        "tensors": names,
    }
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", FORMAT_VERSION))
        fh.write(struct.pack("<I", len(header_bytes)))
        fh.write(header_bytes)
        for name in names:
            arr = np.ascontiguousarray(tensors[name], dtype="<f4")
            encoded = name.encode("utf-8")
            fh.write(struct.pack("<H", len(encoded)))
            fh.write(encoded)
            fh.write(struct.pack("<B", arr.ndim))
            for dim in arr.shape:
                fh.write(struct.pack("<I", dim))
            fh.write(arr.tobytes())


def load_checkpoint(path, dtype=np.float32) -> LoadedCheckpoint:
    path = Path(path)
    raw = path.read_bytes()
    if raw[:4] != MAGIC:
        raise CheckpointError(f"{path}: not a model checkpoint (bad magic)")
    offset = 4
    (format_version,) = struct.unpack_from("<I", raw, offset)
    offset += 4
    if format_version != FORMAT_VERSION:
        raise CheckpointError(
            f"{path}: unsupported checkpoint format {format_version}, expected {FORMAT_VERSION}"
        )
    (header_len,) = struct.unpack_from("<I", raw, offset)
    offset += 4
    header = json.loads(raw[offset : offset + header_len].decode("utf-8"))
    offset += header_len
    if header.get("interface_version") != INTERFACE_VERSION:
        raise CheckpointError(
            f"{path}: interface version {header.get('interface_version')} is incompatible "
            f"with this build ({INTERFACE_VERSION})"
        )

    tensors = {}
    while offset < len(raw):
        (name_len,) = struct.unpack_from("<H", raw, offset)
        offset += 2
        name = raw[offset : offset + name_len].decode("utf-8")
        offset += name_len
        (ndim,) = struct.unpack_from("<B", raw, offset)
        offset += 1
        shape = struct.unpack_from(f"<{ndim}I", raw, offset)
        offset += 4 * ndim
        count = int(np.prod(shape)) if ndim else 1
        arr = np.frombuffer(raw, dtype="<f4", count=count, offset=offset).reshape(shape)
        offset += 4 * count
        tensors[name] = arr.astype(dtype)

    expected = set(header["tensors"])
    if set(tensors) != expected:
        raise CheckpointError(f"{path}: tensor records do not match the header listing")

    model = GanModel.build(ModelConfig.from_dict(header["model"]), dtype=dtype)
    model.restore(tensors)
    return LoadedCheckpoint(
        model=model,
        normalization=NormalizationConfig.from_dict(header["normalization"]),
        sample_rate=int(header["sample_rate"]),
    )
