"""Embedding corpora: records, grades, and the JSON-lines file format."""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

MAX_FRAMES = 20
N_COVERS = 2


class CorpusError(ValueError):
    """Base class for corpus problems."""


class CorpusParseError(CorpusError):
    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class SchemaError(CorpusError):
    """Embedding dimensions disagree within a corpus or with a model."""


class ValidationError(CorpusError):
    """A record violates a field constraint."""


class QualityGrade(enum.IntEnum):
    BAD = 0
    FAIR = 1
    GOOD = 2
    EXCELLENT = 3

    @property
    def soft_label(self) -> float:
        return SOFT_LABELS[self]

    @property
    def label(self) -> str:
        return self.name.lower()

    @classmethod
    def parse(cls, name: str) -> "QualityGrade":
        try:
            return cls[name.upper()]
        except (KeyError, AttributeError):
            raise ValidationError(f"unknown grade {name!r}") from None


SOFT_LABELS = {
    QualityGrade.BAD: 0.0,
    QualityGrade.FAIR: 0.3,
    QualityGrade.GOOD: 0.6,
    QualityGrade.EXCELLENT: 1.0,
}


def is_positive(grade: QualityGrade) -> int:
    """Binary target for AUC: {good, excellent} -> 1, {bad, fair} -> 0."""
    return int(grade >= QualityGrade.GOOD)


@dataclass(eq=False)
class VideoRecord:
    id: str
    text_embedding: np.ndarray  # (d_t,)
    frame_embeddings: np.ndarray  # (m, d_f), covers not included
    cover_embeddings: np.ndarray  # (2, d_f): resized, center-cropped
    grade: QualityGrade | None = None

    def __post_init__(self):
        self.text_embedding = np.asarray(self.text_embedding, dtype=np.float32)
        self.frame_embeddings = np.asarray(self.frame_embeddings, dtype=np.float32)
        self.cover_embeddings = np.asarray(self.cover_embeddings, dtype=np.float32)
        if isinstance(self.grade, str):
            self.grade = QualityGrade.parse(self.grade)
        elif self.grade is not None:
            self.grade = QualityGrade(self.grade)
        self.validate()

    @property
    def n_frames(self) -> int:
        return self.frame_embeddings.shape[0]

    @property
    def d_t(self) -> int:
        return self.text_embedding.shape[0]

    @property
    def d_f(self) -> int:
        return self.frame_embeddings.shape[1]

    def validate(self) -> None:
        if self.text_embedding.ndim != 1 or self.text_embedding.size == 0:
            raise ValidationError(f"{self.id}: text_embedding must be a non-empty vector")
        if self.frame_embeddings.ndim != 2:
            raise ValidationError(f"{self.id}: frame_embeddings must be a matrix")
        m = self.frame_embeddings.shape[0]
        if not 1 <= m <= MAX_FRAMES:
            raise ValidationError(f"{self.id}: {m} frames, expected 1..{MAX_FRAMES}")
        d_f = self.frame_embeddings.shape[1]
        if d_f == 0:
            raise ValidationError(f"{self.id}: frame embeddings have zero width")
        if self.cover_embeddings.shape != (N_COVERS, d_f):
            raise ValidationError(
                f"{self.id}: cover_embeddings shape {self.cover_embeddings.shape}, expected ({N_COVERS}, {d_f})"
            )
        for name in ("text_embedding", "frame_embeddings", "cover_embeddings"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise ValidationError(f"{self.id}: {name} contains non-finite values")

    def to_json(self) -> dict:
        obj = {
            "id": self.id,
            "text_embedding": self.text_embedding.tolist(),
            "frame_embeddings": self.frame_embeddings.tolist(),
            "cover_embeddings": self.cover_embeddings.tolist(),
        }
        if self.grade is not None:
            obj["grade"] = self.grade.label
        return obj

    def same_as(self, other: "VideoRecord") -> bool:
        """Bitwise equality of every field."""
        return (
            self.id == other.id
            and self.grade == other.grade
            and all(
                a.shape == b.shape and a.tobytes() == b.tobytes()
                for a, b in (
                    (self.text_embedding, other.text_embedding),
                    (self.frame_embeddings, other.frame_embeddings),
                    (self.cover_embeddings, other.cover_embeddings),
                )
            )
        )


_KEYS = {"id", "text_embedding", "frame_embeddings", "cover_embeddings", "grade"}
_REQUIRED = _KEYS - {"grade"}


def _reject_constant(token: str):
    raise ValueError(f"non-finite literal {token}")


def parse_record(obj: dict, require_grade: bool = False) -> VideoRecord:
    if not isinstance(obj, dict):
        raise ValidationError("record must be a JSON object")
    unknown = set(obj) - _KEYS
    if unknown:
        raise ValidationError(f"unknown keys {sorted(unknown)}")
    missing = _REQUIRED - set(obj)
    if missing:
        raise ValidationError(f"missing keys {sorted(missing)}")
    if not isinstance(obj["id"], str):
        raise ValidationError("id must be a string")
    grade = obj.get("grade")
    if grade is None and require_grade:
        raise ValidationError(f"{obj['id']}: grade required")
    try:
        return VideoRecord(
            id=obj["id"],
            text_embedding=np.array(obj["text_embedding"], dtype=np.float64),
            frame_embeddings=np.array(obj["frame_embeddings"], dtype=np.float64),
            cover_embeddings=np.array(obj["cover_embeddings"], dtype=np.float64),
            grade=grade,
        )
    except (TypeError, ValueError) as exc:
        if isinstance(exc, CorpusError):
            raise
        raise ValidationError(f"{obj['id']}: malformed embedding arrays ({exc})") from None


def check_homogeneous(records: Sequence[VideoRecord]) -> tuple[int, int] | None:
    """Return the shared (d_t, d_f), raising SchemaError on disagreement."""
    if not records:
        return None
    d_t, d_f = records[0].d_t, records[0].d_f
    for r in records[1:]:
        if (r.d_t, r.d_f) != (d_t, d_f):
            raise SchemaError(f"{r.id}: dims (d_t={r.d_t}, d_f={r.d_f}) differ from corpus ({d_t}, {d_f})")
    return d_t, d_f


def load_corpus(path: str | Path, require_grades: bool = False) -> list[VideoRecord]:
    records = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line, parse_constant=_reject_constant)
            except ValueError as exc:
                raise CorpusParseError(line_no, f"invalid JSON ({exc})") from None
            try:
                record = parse_record(obj, require_grade=require_grades)
            except ValidationError as exc:
                raise ValidationError(f"line {line_no}: {exc}") from None
            if records and (record.d_t, record.d_f) != (records[0].d_t, records[0].d_f):
                raise SchemaError(
                    f"line {line_no}: dims (d_t={record.d_t}, d_f={record.d_f}) differ from "
                    f"corpus ({records[0].d_t}, {records[0].d_f})"
                )
            records.append(record)
    return records


def save_corpus(records: Iterable[VideoRecord], path: str | Path) -> None:
    records = list(records)
    for r in records:
        r.validate()
    check_homogeneous(records)
    # float32 -> float64 is exact and json writes the shortest round-tripping repr
    lines = [json.dumps(r.to_json(), allow_nan=False, separators=(",", ":")) for r in records]
    with open(path, "w", encoding="utf-8") as fh:
        for line in lines:
            fh.write(line)
            fh.write("\n")
