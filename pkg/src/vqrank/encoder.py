"""Temporal video encoder: a small post-LN transformer over frame embeddings.

Input sequence per video: [CLS] + m frames + 2 covers. Frames take position
slots 1..m; the two covers always take the last two slots of the position
table so their embeddings do not depend on m.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .ingest import VideoRecord
from .model import ConfigurationError, ModelConfig, ModelParameters


@dataclass
class VideoRepresentation:
    video_vector: np.ndarray  # (d,)
    frame_matrix: np.ndarray  # (m, d), covers excluded


def _linear(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    return ad.add(ad.matmul(x, w), b)


def _split_heads(x: Tensor, n_heads: int) -> Tensor:
    b, length, d = x.shape
    return ad.transpose(ad.reshape(x, (b, length, n_heads, d // n_heads)), (0, 2, 1, 3))


def _merge_heads(x: Tensor) -> Tensor:
    b, h, length, dh = x.shape
    return ad.reshape(ad.transpose(x, (0, 2, 1, 3)), (b, length, h * dh))


def transformer_layer(
    x: Tensor,
    p: Mapping[str, Tensor],
    prefix: str,
    n_heads: int,
    dropout: float = 0.0,
    train: bool = False,
    rng: np.random.Generator | None = None,
) -> tuple[Tensor, Tensor]:
    """One post-LN layer; returns (output, attention weights [B, heads, L, L])."""
    q = _split_heads(_linear(x, p[prefix + "wq"], p[prefix + "bq"]), n_heads)
    k = _split_heads(_linear(x, p[prefix + "wk"], p[prefix + "bk"]), n_heads)
    v = _split_heads(_linear(x, p[prefix + "wv"], p[prefix + "bv"]), n_heads)
    ctx, weights = ad.attention(q, k, v)
    attn_out = _linear(_merge_heads(ctx), p[prefix + "wo"], p[prefix + "bo"])
    h = ad.layer_norm(ad.add(x, ad.dropout(attn_out, dropout, rng, train)), p[prefix + "ln1.g"], p[prefix + "ln1.b"])
    ff = _linear(ad.relu(_linear(h, p[prefix + "ff1.w"], p[prefix + "ff1.b"])), p[prefix + "ff2.w"], p[prefix + "ff2.b"])
    out = ad.layer_norm(ad.add(h, ad.dropout(ff, dropout, rng, train)), p[prefix + "ln2.g"], p[prefix + "ln2.b"])
    return out, weights


def position_slots(m: int, cfg: ModelConfig) -> np.ndarray:
    return np.concatenate([np.arange(m + 1), [cfg.max_len - 1, cfg.max_len]])


def encode_batch(
    frames: np.ndarray,
    covers: np.ndarray,
    p: Mapping[str, Tensor],
    cfg: ModelConfig,
    dropout: float = 0.0,
    train: bool = False,
    rng: np.random.Generator | None = None,
    return_attention: bool = False,
):
    """Encode B videos sharing the same frame count.

    frames: (B, m, d_f); covers: (B, 2, d_f). Returns (video_vectors [B, d],
    frame_matrix [B, m, d]) and, optionally, the per-layer attention weights.
    """
    if frames.ndim != 3 or covers.ndim != 3 or covers.shape[1] != 2:
        raise ConfigurationError(f"bad input shapes frames={frames.shape}, covers={covers.shape}")
    b, m, d_f = frames.shape
    if d_f != cfg.d_f or covers.shape[2] != cfg.d_f or covers.shape[0] != b:
        raise ConfigurationError(f"frame dim {d_f}/{covers.shape[2]} does not match model d_f={cfg.d_f}")
    if m + 2 > cfg.max_len:
        raise ConfigurationError(f"{m} frames exceed the position table (max_len={cfg.max_len})")
    dtype = p["encoder.in_proj.w"].dtype
    seq = Tensor(np.concatenate([frames, covers], axis=1).astype(dtype, copy=False))
    x = _linear(seq, p["encoder.in_proj.w"], p["encoder.in_proj.b"])
    cls = ad.mul(Tensor(np.ones((b, 1, 1), dtype=dtype)), p["encoder.cls"])
    x = ad.concat([cls, x], axis=1)
    slots = position_slots(m, cfg)
    pos = ad.concat([p["encoder.pos"][: m + 1], p["encoder.pos"][cfg.max_len - 1 :]], axis=0)
    assert pos.shape[0] == len(slots)
    x = ad.dropout(ad.add(x, pos), dropout, rng, train)
    attn = []
    for i in range(cfg.n_layers):
        x, w = transformer_layer(x, p, f"encoder.layer{i}.", cfg.n_heads, dropout, train, rng)
        attn.append(w)
    video = x[:, 0, :]
    frame_matrix = x[:, 1 : m + 1, :]
    if return_attention:
        return video, frame_matrix, attn
    return video, frame_matrix


def project_text(text: np.ndarray | Tensor, p: Mapping[str, Tensor]) -> Tensor:
    """Linear map from the text-embedding space into the model dimension."""
    w = p["text_proj.w"]
    t = text if isinstance(text, Tensor) else Tensor(np.asarray(text, dtype=w.dtype))
    if t.shape[-1] != w.shape[0]:
        raise ConfigurationError(f"text dim {t.shape[-1]} does not match model d_t={w.shape[0]}")
    squeeze = t.ndim == 1
    if squeeze:
        t = ad.reshape(t, (1, t.shape[0]))
    out = _linear(t, w, p["text_proj.b"])
    return out[0] if squeeze else out


def leaf_tensors(params: ModelParameters, requires_grad: bool = False) -> dict[str, Tensor]:
    return {k: Tensor(v, requires_grad=requires_grad, check_finite=False) for k, v in params.tensors.items()}


def encode_video(record: VideoRecord, params: ModelParameters, mode: str = "infer", dropout: float = 0.0,
                 rng: np.random.Generator | None = None) -> VideoRepresentation:
    if mode not in ("train", "infer"):
        raise ValueError(f"mode must be 'train' or 'infer', got {mode!r}")
    p = leaf_tensors(params)
    video, frames = encode_batch(
        record.frame_embeddings[None], record.cover_embeddings[None], p, params.config,
        dropout=dropout, train=mode == "train", rng=rng,
    )
    return VideoRepresentation(video.data[0].copy(), frames.data[0].copy())
