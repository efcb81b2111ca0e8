"""The four assessment branches. Each returns unbounded logits.

All functions accept leading batch dimensions: vectors are ``(..., d)`` and
frame matrices ``(..., m, d)``. Plain arrays are promoted to constant tensors.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor


class DegenerateInputError(ValueError):
    pass


@dataclass
class BranchScores:
    s_vt_global: float
    s_vt_local: float
    s_vt: float
    s_fc: float
    s_fq: float
    s_tq: float

    def as_vector(self) -> np.ndarray:
        return np.array([self.s_vt, self.s_fc, self.s_fq, self.s_tq])

    def to_json(self) -> dict:
        return {
            "vtmab": self.s_vt,
            "fcab": self.s_fc,
            "fqab": self.s_fq,
            "tqab": self.s_tq,
            "vtmab_global": self.s_vt_global,
            "vtmab_local": self.s_vt_local,
        }


def _t(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(np.asarray(x, dtype=np.float64))


def vtmab_score(video, frames, text, normalize: bool = False) -> tuple[Tensor, Tensor, Tensor]:
    """Global, local and combined video-text matching scores."""
    video, frames, text = _t(video), _t(frames), _t(text)
    if frames.shape[-2] == 0:
        raise DegenerateInputError("video-text matching needs at least one frame")
    if not video.shape[-1] == frames.shape[-1] == text.shape[-1]:
        raise ad.DimensionError(f"vtmab: dims {video.shape}, {frames.shape}, {text.shape} disagree")
    if normalize:
        video, frames, text = ad.l2_normalize(video), ad.l2_normalize(frames), ad.l2_normalize(text)
    global_score = ad.dot(video, text)
    text_row = ad.reshape(text, text.shape[:-1] + (1, text.shape[-1]))
    local_score = ad.mean(ad.dot(frames, text_row), axis=-1)
    combined = ad.mul(ad.add(global_score, local_score), 0.5)
    return global_score, local_score, combined


def coherence_rows(video, frames) -> Tensor:
    """Stack of (video - v_j) rows followed by (v_{j+1} - v_j) rows.

    A single-frame video has no local rows; only the global row is returned.
    """
    video, frames = _t(video), _t(frames)
    m = frames.shape[-2]
    if m == 0:
        raise DegenerateInputError("frame coherence needs at least one frame")
    video_row = ad.reshape(video, video.shape[:-1] + (1, video.shape[-1]))
    global_rows = ad.sub(video_row, frames)
    if m == 1:
        return global_rows
    local_rows = ad.sub(frames[..., 1:, :], frames[..., :-1, :])
    return ad.concat([global_rows, local_rows], axis=-2)


def fcab_score(video, frames, w_c) -> Tensor:
    w_c = _t(w_c)
    rows = coherence_rows(video, frames)
    if w_c.ndim == 1:
        w_c = ad.reshape(w_c, (w_c.shape[0], 1))
    if rows.shape[-1] != w_c.shape[0]:
        raise ad.DimensionError(f"fcab: row dim {rows.shape[-1]} vs W_C {w_c.shape}")
    pooled = ad.mean(rows, axis=-2)
    if pooled.ndim == 1:
        return ad.reshape(ad.matmul(_as_matrix(pooled), w_c), ())
    return _squeeze_last(ad.matmul(pooled, w_c))


def _as_matrix(x: Tensor) -> Tensor:
    return ad.reshape(x, (1, x.shape[0]))


def _squeeze_last(x: Tensor) -> Tensor:
    return ad.reshape(x, x.shape[:-1])


def mlp_score(x, p: Mapping[str, Tensor], prefix: str) -> Tensor:
    """Two-layer ReLU MLP with a linear scalar head."""
    x = _t(x)
    w1 = p[prefix + "w1"]
    if x.shape[-1] != w1.shape[0]:
        raise ad.DimensionError(f"{prefix}: input dim {x.shape[-1]} vs weight {w1.shape}")
    single = x.ndim == 1
    if single:
        x = _as_matrix(x)
    hidden = ad.relu(ad.add(ad.matmul(x, w1), p[prefix + "b1"]))
    out = _squeeze_last(ad.add(ad.matmul(hidden, p[prefix + "w2"]), p[prefix + "b2"]))
    return out[0] if single else out


def fqab_score(video, p: Mapping[str, Tensor]) -> Tensor:
    return mlp_score(video, p, "branches.mlp_f.")


def tqab_score(text, p: Mapping[str, Tensor]) -> Tensor:
    return mlp_score(text, p, "branches.mlp_t.")
