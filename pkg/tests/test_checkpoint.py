import struct

import numpy as np
import pytest

from vqrank.autodiff import DimensionError
from vqrank.checkpoint import CheckpointError, decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint
from vqrank.model import ModelConfig, init_parameters
from vqrank.training import AdamState, adam_step

CFG = ModelConfig(d=8, n_heads=2, d_t=6, d_f=5)


@pytest.fixture()
def trained():
    params = init_parameters(CFG, np.random.default_rng(0))
    state = AdamState.zeros_like(params)
    rng = np.random.default_rng(1)
    for _ in range(3):
        grads = {k: rng.standard_normal(v.shape).astype(np.float32) for k, v in params.tensors.items()}
        adam_step(params.tensors, grads, state, 1e-2)
    return params, state


def test_roundtrip_is_bitwise(tmp_path, trained):
    params, state = trained
    path = tmp_path / "m.ckpt"
    save_checkpoint(params, state, path)
    p2, s2 = load_checkpoint(path)
    assert p2.same_as(params)
    assert p2.names() == params.names()
    assert s2.same_as(state)
    save_checkpoint(p2, s2, tmp_path / "again.ckpt")
    assert (tmp_path / "again.ckpt").read_bytes() == path.read_bytes()


def test_params_only_roundtrip(trained):
    params, _ = trained
    p2, s2 = decode_checkpoint(encode_checkpoint(params))
    assert p2.same_as(params) and s2 is None


def test_corrupted_payload_byte(trained):
    blob = bytearray(encode_checkpoint(*trained))
    blob[-10] ^= 0xFF
    with pytest.raises(CheckpointError, match="checksum"):
        decode_checkpoint(bytes(blob))


def test_different_dimension_rejected(trained):
    blob = encode_checkpoint(*trained)
    with pytest.raises(DimensionError):
        decode_checkpoint(blob, expected=ModelConfig(d=16, n_heads=2, d_t=6, d_f=5))
    params, _ = decode_checkpoint(blob, expected=CFG)
    assert params.config == CFG


def test_truncated(trained):
    blob = encode_checkpoint(*trained)
    for cut in (5, len(blob) // 2, len(blob) - 1):
        with pytest.raises(CheckpointError):
            decode_checkpoint(blob[:cut])


def test_version_and_magic(trained):
    blob = bytearray(encode_checkpoint(*trained))
    bumped = bytes(blob[:8]) + struct.pack("<I", 2) + bytes(blob[12:])
    with pytest.raises(CheckpointError, match="version"):
        decode_checkpoint(bumped)
    with pytest.raises(CheckpointError, match="magic"):
        decode_checkpoint(b"NOTACKPT" + bytes(blob[8:]))
