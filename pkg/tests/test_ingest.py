import json

import numpy as np
import pytest

from vqrank.ingest import (
    CorpusParseError,
    QualityGrade,
    SchemaError,
    ValidationError,
    VideoRecord,
    is_positive,
    load_corpus,
    parse_record,
    save_corpus,
)


def _obj(m=3, d_t=4, d_f=5, grade="good", rid="v0"):
    rng = np.random.default_rng(m)
    obj = {
        "id": rid,
        "text_embedding": rng.standard_normal(d_t).tolist(),
        "frame_embeddings": rng.standard_normal((m, d_f)).tolist(),
        "cover_embeddings": rng.standard_normal((2, d_f)).tolist(),
    }
    if grade is not None:
        obj["grade"] = grade
    return obj


def _write(path, objs):
    path.write_text("".join(json.dumps(o) + "\n" for o in objs))


def test_grades_and_soft_labels():
    assert [g.soft_label for g in QualityGrade] == [0.0, 0.3, 0.6, 1.0]
    assert QualityGrade.parse("excellent") is QualityGrade.EXCELLENT
    assert [is_positive(g) for g in QualityGrade] == [0, 0, 1, 1]
    with pytest.raises(ValidationError):
        QualityGrade.parse("great")


def test_record_with_eight_frames(tmp_path):
    p = tmp_path / "c.jsonl"
    _write(p, [_obj(m=8, d_t=6, d_f=7)])
    (r,) = load_corpus(p)
    assert r.n_frames == 8 and r.d_t == 6 and r.d_f == 7
    assert r.frame_embeddings.dtype == np.float32
    assert r.grade is QualityGrade.GOOD


def test_frame_count_bounds(tmp_path):
    assert parse_record(_obj(m=20)).n_frames == 20
    with pytest.raises(ValidationError, match="21 frames"):
        parse_record(_obj(m=21))
    with pytest.raises(ValidationError):
        parse_record(_obj(m=0))


def test_cover_shape_enforced():
    obj = _obj()
    obj["cover_embeddings"] = obj["cover_embeddings"][:1]
    with pytest.raises(ValidationError):
        parse_record(obj)


def test_grade_optional_unless_required():
    assert parse_record(_obj(grade=None)).grade is None
    with pytest.raises(ValidationError, match="grade required"):
        parse_record(_obj(grade=None), require_grade=True)


def test_roundtrip_is_bitwise(tmp_path):
    rng = np.random.default_rng(0)
    records = [
        VideoRecord(f"r{i}", rng.standard_normal(8), rng.standard_normal((int(rng.integers(1, 21)), 6)),
                    rng.standard_normal((2, 6)), QualityGrade(i % 4) if i % 3 else None)
        for i in range(10)
    ]
    p = tmp_path / "rt.jsonl"
    save_corpus(records, p)
    back = load_corpus(p)
    assert len(back) == 10
    assert all(a.same_as(b) for a, b in zip(records, back))


def test_empty_file_gives_empty_corpus(tmp_path):
    p = tmp_path / "empty.jsonl"
    p.write_text("")
    assert load_corpus(p) == []


def test_non_finite_refused(tmp_path):
    with pytest.raises(ValidationError):
        VideoRecord("x", np.array([1.0, np.nan]), np.ones((1, 2)), np.ones((2, 2)))
    p = tmp_path / "nan.jsonl"
    p.write_text('{"id": "a", "text_embedding": [NaN], "frame_embeddings": [[1]], "cover_embeddings": [[1],[1]]}\n')
    with pytest.raises(CorpusParseError):
        load_corpus(p)


def test_unknown_keys_rejected():
    obj = _obj()
    obj["extra"] = 1
    with pytest.raises(ValidationError, match="extra"):
        parse_record(obj)


def test_parse_error_carries_line_number(tmp_path):
    p = tmp_path / "bad.jsonl"
    p.write_text(json.dumps(_obj()) + "\n" + "{not json\n")
    with pytest.raises(CorpusParseError) as info:
        load_corpus(p)
    assert info.value.line_no == 2


def test_mixed_dimensions_rejected(tmp_path):
    p = tmp_path / "mixed.jsonl"
    _write(p, [_obj(d_t=4), _obj(d_t=5, rid="v1")])
    with pytest.raises(SchemaError, match="line 2"):
        load_corpus(p)
    with pytest.raises(SchemaError):
        save_corpus([parse_record(_obj(d_f=5)), parse_record(_obj(d_f=6))], p)
