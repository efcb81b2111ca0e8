"""Full forward pass: encoder -> branches -> SE aggregation, batched by frame count."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from . import autodiff as ad
from .aggregation import se_combine, se_weights
from .autodiff import Tensor
from .branches import fcab_score, fqab_score, tqab_score, vtmab_score
from .encoder import encode_batch, project_text
from .ingest import VideoRecord
from .model import ConfigurationError, ModelConfig


@dataclass
class BatchOutput:
    """Outputs for records in ``order`` (a permutation of the input indices)."""

    order: np.ndarray
    score: Tensor  # (B,)
    weights: Tensor  # (B, n_enabled)
    branch_logits: Tensor  # (B, 4): vt, fc, fq, tq
    vt_global: Tensor  # (B,)
    vt_local: Tensor  # (B,)


def group_by_frames(records: Sequence[VideoRecord]) -> list[np.ndarray]:
    counts = np.array([r.n_frames for r in records])
    return [np.flatnonzero(counts == m) for m in np.unique(counts)]


def check_record(record: VideoRecord, cfg: ModelConfig) -> None:
    if record.d_t != cfg.d_t or record.d_f != cfg.d_f:
        raise ConfigurationError(
            f"{record.id}: dims (d_t={record.d_t}, d_f={record.d_f}) do not match model "
            f"(d_t={cfg.d_t}, d_f={cfg.d_f})"
        )


def _column(x: Tensor) -> Tensor:
    return ad.reshape(x, x.shape + (1,))


def forward_group(
    frames: np.ndarray,
    covers: np.ndarray,
    texts: np.ndarray,
    p: Mapping[str, Tensor],
    cfg: ModelConfig,
    dropout: float = 0.0,
    train: bool = False,
    rng: np.random.Generator | None = None,
):
    video, frame_matrix = encode_batch(frames, covers, p, cfg, dropout, train, rng)
    text = project_text(Tensor(texts.astype(p["text_proj.w"].dtype, copy=False)), p)
    vt_g, vt_l, vt = vtmab_score(video, frame_matrix, text, normalize=cfg.normalize_vt)
    fc = fcab_score(video, frame_matrix, p["branches.w_c"])
    fq = fqab_score(video, p)
    tq = tqab_score(text, p)
    logits = ad.concat([_column(vt), _column(fc), _column(fq), _column(tq)], axis=-1)
    mask = cfg.branch_mask
    z = se_weights(video, text, p["se.w_s"], p["se.w_e"], mask)
    s = se_combine(logits, z, mask)
    return s, z, logits, vt_g, vt_l


def forward_batch(
    records: Sequence[VideoRecord],
    p: Mapping[str, Tensor],
    cfg: ModelConfig,
    dropout: float = 0.0,
    train: bool = False,
    rng: np.random.Generator | None = None,
) -> BatchOutput:
    if not records:
        raise ValueError("empty batch")
    for r in records:
        check_record(r, cfg)
    parts, order = [], []
    for idx in group_by_frames(records):
        frames = np.stack([records[i].frame_embeddings for i in idx])
        covers = np.stack([records[i].cover_embeddings for i in idx])
        texts = np.stack([records[i].text_embedding for i in idx])
        parts.append(forward_group(frames, covers, texts, p, cfg, dropout, train, rng))
        order.append(idx)
    if len(parts) == 1:
        s, z, logits, g, loc = parts[0]
    else:
        s, z, logits, g, loc = (ad.concat([part[k] for part in parts], axis=0) for k in range(5))
    return BatchOutput(np.concatenate(order), s, z, logits, g, loc)
