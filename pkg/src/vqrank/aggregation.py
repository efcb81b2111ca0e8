"""Squeeze-and-excitation branch weighting and the training losses."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .ingest import SOFT_LABELS, QualityGrade

DEFAULT_MARGIN = 0.1
DEFAULT_ALPHA = 0.5


@dataclass
class LossConfig:
    tau: float = DEFAULT_MARGIN
    alpha: float = DEFAULT_ALPHA
    # "intent": penalize a lower-graded item scoring within tau of a higher-graded one.
    # "literal": the reverse ordering, kept for comparison runs.
    pair_direction: str = "intent"
    # "pairs": divide by the number of cross-grade pairs; "batch": divide by N.
    pair_normalization: str = "pairs"

    def __post_init__(self):
        if self.tau < 0:
            raise ValueError("tau must be non-negative")
        if not 0 <= self.alpha <= 1:
            raise ValueError("alpha must lie in [0, 1]")
        if self.pair_direction not in ("intent", "literal"):
            raise ValueError(f"unknown pair_direction {self.pair_direction!r}")
        if self.pair_normalization not in ("pairs", "batch"):
            raise ValueError(f"unknown pair_normalization {self.pair_normalization!r}")


@dataclass
class AggregatedScore:
    z: np.ndarray  # (4,) branch weights
    s: float


def _t(x, dtype=np.float64) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(np.asarray(x, dtype=dtype))


def se_weights(video, text, w_s, w_e, mask: Sequence[bool] | None = None) -> Tensor:
    """Branch weights z: softmax(relu([v; t] W_S)^T W_E), restricted to ``mask``.

    Disabled branches are dropped before the softmax, so the returned tensor
    has one column per enabled branch.
    """
    video, text, w_s, w_e = _t(video), _t(text), _t(w_s), _t(w_e)
    d = video.shape[-1]
    if text.shape[-1] != d or w_s.shape != (d, 1) or w_e.shape[0] != 2:
        raise ad.DimensionError(
            f"se_aggregate: shapes video {video.shape}, text {text.shape}, W_S {w_s.shape}, W_E {w_e.shape}"
        )
    lead = video.shape[:-1]
    stacked = ad.concat(
        [ad.reshape(video, lead + (1, d)), ad.reshape(text, lead + (1, d))], axis=-2
    )  # (..., 2, d)
    squeezed = ad.relu(ad.matmul(stacked, w_s))  # (..., 2, 1)
    excited = ad.matmul(ad.transpose(squeezed), w_e)  # (..., 1, 4)
    logits = ad.reshape(excited, lead + (w_e.shape[1],))
    if mask is not None and not all(mask):
        cols = [logits[..., i : i + 1] for i, on in enumerate(mask) if on]
        logits = ad.concat(cols, axis=-1)
    return ad.softmax(logits)


def se_combine(branch_scores, z: Tensor, mask: Sequence[bool] | None = None) -> Tensor:
    """Final score sigmoid(<scores, z>); ``branch_scores`` is (..., 4)."""
    scores = _t(branch_scores, z.dtype)
    if mask is not None and not all(mask):
        scores = ad.concat([scores[..., i : i + 1] for i, on in enumerate(mask) if on], axis=-1)
    if scores.shape[-1] != z.shape[-1]:
        raise ad.DimensionError(f"se_combine: scores {scores.shape} vs weights {z.shape}")
    return ad.sigmoid(ad.sum_(ad.mul(scores, z), axis=-1))


def expand_weights(z: np.ndarray, mask: Sequence[bool]) -> np.ndarray:
    """Scatter weights of enabled branches back into a 4-column array."""
    out = np.zeros(z.shape[:-1] + (len(mask),), dtype=z.dtype)
    out[..., [i for i, on in enumerate(mask) if on]] = z
    return out


def se_aggregate(video, text, scores, w_s, w_e) -> AggregatedScore:
    """Numeric convenience wrapper for a single video."""
    vec = scores.as_vector() if hasattr(scores, "as_vector") else np.asarray(scores, dtype=np.float64)
    z = se_weights(video, text, w_s, w_e)
    s = se_combine(vec, z)
    return AggregatedScore(z=np.array(z.data, dtype=np.float64), s=float(s.data))


# ---------------------------------------------------------------- losses


def pointwise_loss(predicted, soft_labels) -> Tensor:
    predicted = _t(predicted)
    labels = np.asarray(soft_labels, dtype=predicted.dtype)
    if predicted.shape != labels.shape:
        raise ad.ContractError(f"pointwise_loss: {predicted.shape} predictions vs {labels.shape} labels")
    if labels.size == 0:
        raise ad.ContractError("pointwise_loss: empty batch")
    diff = ad.sub(predicted, Tensor(labels))
    return ad.mean(ad.mul(diff, diff))


def _grade_values(grades) -> np.ndarray:
    return np.array([int(QualityGrade(g)) if not isinstance(g, str) else int(QualityGrade.parse(g)) for g in grades])


def pairwise_loss(
    predicted,
    grades,
    tau: float = DEFAULT_MARGIN,
    direction: str = "intent",
    normalization: str = "pairs",
) -> tuple[Tensor, bool]:
    """Margin hinge over every cross-grade pair in the batch.

    Returns ``(loss, degenerate)``; ``degenerate`` is True (and the loss 0)
    when all grades are equal.
    """
    predicted = _t(predicted)
    g = _grade_values(grades)
    n = predicted.shape[0]
    if predicted.ndim != 1 or g.shape != (n,):
        raise ad.ContractError(f"pairwise_loss: {predicted.shape} predictions vs {g.shape} grades")
    # higher[i, j]: item i strictly outranks item j
    higher = g[:, None] > g[None, :]
    if direction == "literal":
        higher = higher.T
    n_pairs = int(higher.sum())
    if n_pairs == 0:
        return ad.mul(ad.sum_(predicted), 0.0), True
    col = ad.reshape(predicted, (n, 1))
    row = ad.reshape(predicted, (1, n))
    # hinge[i, j] = max(0, f_j - f_i + tau) where i is the higher-graded item
    hinge = ad.relu(ad.add(ad.sub(row, col), tau))
    masked = ad.mul(hinge, Tensor(higher.astype(predicted.dtype)))
    denom = n_pairs if normalization == "pairs" else n
    return ad.mul(ad.sum_(masked), 1.0 / denom), False


def combined_loss(point, pair, alpha: float = DEFAULT_ALPHA):
    if not 0 <= alpha <= 1:
        raise ValueError("alpha must lie in [0, 1]")
    if isinstance(point, Tensor) or isinstance(pair, Tensor):
        return ad.add(ad.mul(point, alpha), ad.mul(pair, 1 - alpha))
    return alpha * point + (1 - alpha) * pair


def soft_labels(grades) -> np.ndarray:
    return np.array([SOFT_LABELS[QualityGrade(v)] for v in _grade_values(grades)])
