"""Binary checkpoint format.

Layout::

    8 bytes   magic  b"VQRCKPT\\0"
    4 bytes   format version (uint32 LE)
    8 bytes   header length (uint64 LE)
    header    UTF-8 JSON: model config, optimizer scalars, and a tensor table
              name -> {"dtype": "f32", "shape": [...], "offset": o, "length": n}
    payload   concatenated little-endian float32 tensors
    4 bytes   CRC-32 of the payload (uint32 LE)
"""

from __future__ import annotations

import json
import struct
import zlib
from pathlib import Path

import numpy as np

from .autodiff import DimensionError
from .model import ModelConfig, ModelParameters, parameter_shapes
from .training import AdamState

MAGIC = b"VQRCKPT\x00"
VERSION = 1
_PREFIX = struct.Struct("<8sIQ")
_CRC = struct.Struct("<I")
_DTYPE = np.dtype("<f4")


class CheckpointError(ValueError):
    pass


def _tensor_table(params: ModelParameters, state: AdamState | None) -> list[tuple[str, np.ndarray]]:
    items = [(f"param/{k}", v) for k, v in params.tensors.items()]
    if state is not None:
        items += [(f"adam.m/{k}", v) for k, v in state.m.items()]
        items += [(f"adam.v/{k}", v) for k, v in state.v.items()]
    return items


def encode_checkpoint(params: ModelParameters, state: AdamState | None = None) -> bytes:
    table, chunks, offset = {}, [], 0
    for name, arr in _tensor_table(params, state):
        if not np.all(np.isfinite(arr)):
            raise CheckpointError(f"{name} contains non-finite values")
        raw = np.ascontiguousarray(arr, dtype=_DTYPE).tobytes()
        table[name] = {"dtype": "f32", "shape": list(arr.shape), "offset": offset, "length": len(raw)}
        chunks.append(raw)
        offset += len(raw)
    header = {"config": params.config.to_dict(), "tensors": table}
    if state is not None:
        header["adam"] = {"step": state.step, "beta1": state.beta1, "beta2": state.beta2, "eps": state.eps}
    head = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    payload = b"".join(chunks)
    return _PREFIX.pack(MAGIC, VERSION, len(head)) + head + payload + _CRC.pack(zlib.crc32(payload))


def decode_checkpoint(blob: bytes, expected: ModelConfig | None = None):
    if len(blob) < _PREFIX.size + _CRC.size:
        raise CheckpointError("truncated checkpoint")
    magic, version, head_len = _PREFIX.unpack_from(blob)
    if magic != MAGIC:
        raise CheckpointError("not a checkpoint (bad magic)")
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version} (expected {VERSION})")
    body = blob[_PREFIX.size :]
    if len(body) < head_len + _CRC.size:
        raise CheckpointError("truncated checkpoint header")
    try:
        header = json.loads(body[:head_len].decode("utf-8"))
    except (UnicodeDecodeError, ValueError) as exc:
        raise CheckpointError(f"corrupt header ({exc})") from None
    payload = body[head_len:-_CRC.size]
    (crc,) = _CRC.unpack(body[-_CRC.size :])
    table = header.get("tensors", {})
    size = sum(entry["length"] for entry in table.values())
    if len(payload) != size:
        raise CheckpointError(f"truncated payload: {len(payload)} bytes, header declares {size}")
    if zlib.crc32(payload) != crc:
        raise CheckpointError("checksum mismatch")

    config = ModelConfig.from_dict(header["config"])
    if expected is not None:
        for key in ("d", "d_t", "d_f", "n_heads", "n_layers", "ff_mult", "mlp_hidden", "max_len"):
            if getattr(expected, key) != getattr(config, key):
                raise DimensionError(
                    f"checkpoint {key}={getattr(config, key)} does not match expected {getattr(expected, key)}"
                )

    arrays = {}
    for name, entry in table.items():
        if entry["dtype"] != "f32":
            raise CheckpointError(f"{name}: unsupported dtype {entry['dtype']}")
        lo, n = entry["offset"], entry["length"]
        arr = np.frombuffer(payload[lo : lo + n], dtype=_DTYPE).astype(np.float32)
        arrays[name] = arr.reshape(entry["shape"])

    names = list(parameter_shapes(config))
    missing = [n for n in names if f"param/{n}" not in arrays]
    if missing:
        raise CheckpointError(f"checkpoint lacks parameters {missing}")
    params = ModelParameters(config, {n: arrays[f"param/{n}"] for n in names})
    state = None
    if "adam" in header:
        meta = header["adam"]
        state = AdamState(
            m={n: arrays[f"adam.m/{n}"] for n in names},
            v={n: arrays[f"adam.v/{n}"] for n in names},
            step=meta["step"], beta1=meta["beta1"], beta2=meta["beta2"], eps=meta["eps"],
        )
    return params, state


def save_checkpoint(params: ModelParameters, state: AdamState | None, path: str | Path) -> None:
    blob = encode_checkpoint(params, state)
    with open(path, "wb") as fh:
        fh.write(blob)


def load_checkpoint(path: str | Path, expected: ModelConfig | None = None):
    """Return ``(params, adam_state_or_None)``; nothing is returned on any error."""
    with open(path, "rb") as fh:
        blob = fh.read()
    return decode_checkpoint(blob, expected)
