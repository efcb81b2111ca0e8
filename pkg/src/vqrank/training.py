"""Training: mixed point/pair objective, Adam, seeded batching."""

from __future__ import annotations

import logging
import warnings
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from . import autodiff as ad
from .aggregation import LossConfig, combined_loss, pairwise_loss, pointwise_loss, soft_labels
from .encoder import leaf_tensors
from .ingest import VideoRecord, check_homogeneous
from .metrics import UndefinedMetricError, auc, binary_labels, pnr
from .model import ModelConfig, ModelParameters, init_parameters
from .network import forward_batch

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    learning_rate: float = 1e-4
    dropout: float = 0.1
    batch_size: int = 32
    epochs: int = 20
    alpha: float = 0.5
    tau: float = 0.1
    seed: int = 7
    val_fraction: float = 0.1
    pair_direction: str = "intent"
    pair_normalization: str = "pairs"
    model: ModelConfig = field(default_factory=ModelConfig)

    def __post_init__(self):
        if isinstance(self.model, dict):
            self.model = ModelConfig.from_dict(self.model)
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be non-negative")
        if not 0 <= self.dropout < 1:
            raise ValueError("dropout must lie in [0, 1)")
        if self.batch_size < 1 or self.epochs < 0:
            raise ValueError("batch_size must be positive and epochs non-negative")
        if not 0 <= self.val_fraction < 1:
            raise ValueError("val_fraction must lie in [0, 1)")
        self.loss_config  # validates alpha / tau / pair options

    @property
    def loss_config(self) -> LossConfig:
        return LossConfig(self.tau, self.alpha, self.pair_direction, self.pair_normalization)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["model"] = self.model.to_dict()
        return out

    @classmethod
    def from_dict(cls, obj: dict) -> "TrainConfig":
        return cls(**obj)


@dataclass
class AdamState:
    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def zeros_like(cls, params: ModelParameters | dict) -> "AdamState":
        tensors = params.tensors if isinstance(params, ModelParameters) else params
        return cls(
            m={k: np.zeros_like(v) for k, v in tensors.items()},
            v={k: np.zeros_like(v) for k, v in tensors.items()},
        )

    def same_as(self, other: "AdamState") -> bool:
        scalars = (self.step, self.beta1, self.beta2, self.eps) == (other.step, other.beta1, other.beta2, other.eps)
        return scalars and all(
            self.m[k].tobytes() == other.m[k].tobytes() and self.v[k].tobytes() == other.v[k].tobytes()
            for k in self.m
        ) and list(self.m) == list(other.m)


def adam_step(params: dict[str, np.ndarray], grads: dict[str, np.ndarray], state: AdamState, lr: float):
    """Bias-corrected Adam, applied in place. Returns ``(params, state)``.

    Every gradient is checked before anything is modified, so a non-finite
    gradient leaves parameters and moments untouched.
    """
    for name, g in grads.items():
        if name not in params:
            raise KeyError(f"gradient for unknown parameter {name}")
        if g.shape != params[name].shape:
            raise ad.DimensionError(f"{name}: gradient {g.shape} vs parameter {params[name].shape}")
        if not np.all(np.isfinite(g)):
            raise ad.NumericError(f"non-finite gradient for {name}")
    state.step += 1
    t = state.step
    c1 = 1 - state.beta1**t
    c2 = 1 - state.beta2**t
    for name, g in grads.items():
        m, v = state.m[name], state.v[name]
        m *= state.beta1
        m += (1 - state.beta1) * g
        v *= state.beta2
        v += (1 - state.beta2) * (g * g)
        update = lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
        params[name] -= update.astype(params[name].dtype, copy=False)
    return params, state


def batch_loss(tensors, records: Sequence[VideoRecord], cfg: ModelConfig, loss_cfg: LossConfig,
               dropout: float = 0.0, train: bool = False, rng=None, pointwise_only: bool = False):
    """Combined loss over one batch; returns (loss tensor, pair-degenerate flag)."""
    out = forward_batch(records, tensors, cfg, dropout, train, rng)
    grades = [records[i].grade for i in out.order]
    point = pointwise_loss(out.score, soft_labels(grades).astype(out.score.dtype))
    if pointwise_only:
        return point, True
    pair, degenerate = pairwise_loss(out.score, grades, loss_cfg.tau, loss_cfg.pair_direction,
                                     loss_cfg.pair_normalization)
    return combined_loss(point, pair, loss_cfg.alpha), degenerate


def evaluate_ranking(records: Sequence[VideoRecord], params: ModelParameters) -> dict:
    from .scoring import score_corpus

    scored = score_corpus(records, params)
    scores = np.array([s.score for s in scored])
    grades = [int(r.grade) for r in records]
    out = {}
    try:
        out["pnr"] = pnr(grades, scores)
    except UndefinedMetricError:
        out["pnr"] = None
    try:
        out["auc"] = auc(binary_labels(records), scores)
    except UndefinedMetricError:
        out["auc"] = None
    return out


@dataclass
class TrainResult:
    params: ModelParameters
    history: list[dict]
    state: AdamState
    pairwise_degenerate: bool = False

    def __iter__(self):
        yield self.params
        yield self.history


def split_indices(n: int, fraction: float, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    perm = rng.permutation(n)
    n_val = int(round(n * fraction))
    if fraction > 0 and n >= 2:
        n_val = min(max(n_val, 1), n - 1)
    return np.sort(perm[n_val:]), np.sort(perm[:n_val])


def train(
    corpus: Sequence[VideoRecord],
    config: TrainConfig | None = None,
    validation: Sequence[VideoRecord] | None = None,
    init: ModelParameters | None = None,
) -> TrainResult:
    """Train on ``corpus``.

    Without an explicit ``validation`` set, ``config.val_fraction`` of the
    corpus is held out using the run seed.
    """
    config = config or TrainConfig()
    if not corpus:
        raise ValueError("empty training corpus")
    if any(r.grade is None for r in corpus):
        raise ValueError("training requires graded records")
    d_t, d_f = check_homogeneous(corpus)
    cfg = ModelConfig.from_dict({**config.model.to_dict(), "d_t": d_t, "d_f": d_f})
    loss_cfg = config.loss_config

    init_rng, split_rng, shuffle_rng, dropout_rng = (
        np.random.default_rng(s) for s in np.random.SeedSequence(config.seed).spawn(4)
    )
    params = init.copy() if init is not None else init_parameters(cfg, init_rng)
    if params.config != cfg:
        raise ValueError("initial parameters do not match the training configuration")
    state = AdamState.zeros_like(params)

    if validation is None:
        train_idx, val_idx = split_indices(len(corpus), config.val_fraction, split_rng)
        train_set = [corpus[i] for i in train_idx]
        val_set = [corpus[i] for i in val_idx]
    else:
        train_set, val_set = list(corpus), list(validation)

    degenerate = len({r.grade for r in train_set}) < 2
    if degenerate:
        warnings.warn("all training grades are equal; optimizing the pointwise term only", RuntimeWarning)

    history = []
    for epoch in range(config.epochs):
        order = shuffle_rng.permutation(len(train_set))
        losses = []
        for start in range(0, len(order), config.batch_size):
            batch = [train_set[i] for i in order[start : start + config.batch_size]]
            tensors = leaf_tensors(params, requires_grad=True)
            loss, _ = batch_loss(tensors, batch, cfg, loss_cfg, config.dropout, True, dropout_rng,
                                 pointwise_only=degenerate)
            ad.backward(loss)
            grads = {k: t.grad if t.grad is not None else np.zeros_like(t.data) for k, t in tensors.items()}
            adam_step(params.tensors, grads, state, config.learning_rate)
            losses.append(float(loss.data))
        entry = {"epoch": epoch, "train_loss": float(np.mean(losses))}
        if val_set:
            metrics = evaluate_ranking(val_set, params)
            entry["val_pnr"], entry["val_auc"] = metrics["pnr"], metrics["auc"]
        history.append(entry)
        log.info("epoch %d: %s", epoch, entry)
    return TrainResult(params, history, state, degenerate)
