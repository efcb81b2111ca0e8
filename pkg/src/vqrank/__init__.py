"""Multi-branch video quality scoring over precomputed text and frame embeddings."""

from .ingest import QualityGrade, VideoRecord, load_corpus, save_corpus
from .model import ModelConfig, ModelParameters, init_parameters
from .scoring import ScoredVideo, score_corpus, score_record
from .training import TrainConfig, train

__all__ = [
    "ModelConfig",
    "ModelParameters",
    "QualityGrade",
    "ScoredVideo",
    "TrainConfig",
    "VideoRecord",
    "init_parameters",
    "load_corpus",
    "save_corpus",
    "score_corpus",
    "score_record",
    "train",
]
