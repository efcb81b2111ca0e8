"""Inference: score records and expose per-branch logits and weights."""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .aggregation import expand_weights
from .branches import BranchScores
from .encoder import leaf_tensors
from .ingest import VideoRecord
from .model import BRANCHES, ConfigurationError, ModelParameters
from .network import check_record, forward_batch

DEFAULT_CHUNK = 256


class ScoringError(RuntimeError):
    def __init__(self, record_id: str, cause: Exception):
        super().__init__(f"scoring failed for {record_id}: {cause}")
        self.record_id = record_id


@dataclass
class ScoredVideo:
    id: str
    score: float
    branch_scores: BranchScores
    branch_weights: np.ndarray  # (4,), zero for disabled branches

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "score": self.score,
            "branch_scores": self.branch_scores.to_json(),
            "branch_weights": dict(zip(BRANCHES, map(float, self.branch_weights))),
        }

    def same_as(self, other: "ScoredVideo") -> bool:
        return self.to_json() == other.to_json()


def _score_chunk(records: Sequence[VideoRecord], params: ModelParameters) -> list[ScoredVideo]:
    p = leaf_tensors(params)
    out = forward_batch(records, p, params.config)
    z = expand_weights(out.weights.data, params.config.branch_mask)
    results: list[ScoredVideo | None] = [None] * len(records)
    for row, idx in enumerate(out.order):
        logits = out.branch_logits.data[row]
        results[idx] = ScoredVideo(
            id=records[idx].id,
            score=float(out.score.data[row]),
            branch_scores=BranchScores(
                s_vt_global=float(out.vt_global.data[row]),
                s_vt_local=float(out.vt_local.data[row]),
                s_vt=float(logits[0]),
                s_fc=float(logits[1]),
                s_fq=float(logits[2]),
                s_tq=float(logits[3]),
            ),
            branch_weights=np.array(z[row], dtype=np.float64),
        )
    return results


def score_record(record: VideoRecord, model: ModelParameters) -> ScoredVideo:
    check_record(record, model.config)
    return _score_chunk([record], model)[0]


def score_corpus(
    records: Sequence[VideoRecord],
    model: ModelParameters,
    workers: int = 1,
    chunk_size: int = DEFAULT_CHUNK,
) -> list[ScoredVideo]:
    """Score records in input order.

    Records are processed in fixed-size chunks; with ``workers > 1`` chunks run
    on a thread pool. Chunk boundaries do not depend on ``workers``, so serial
    and parallel runs produce identical results.
    """
    records = list(records)
    for r in records:
        try:
            check_record(r, model.config)
        except ConfigurationError as exc:
            raise ScoringError(r.id, exc) from exc
    chunks = [records[i : i + chunk_size] for i in range(0, len(records), chunk_size)]
    if workers > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda c: _score_chunk(c, model), chunks))
    else:
        parts = [_score_chunk(c, model) for c in chunks]
    return [s for part in parts for s in part]


def write_scores(scored: Sequence[ScoredVideo], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for s in scored:
            fh.write(json.dumps(s.to_json(), separators=(",", ":")))
            fh.write("\n")
