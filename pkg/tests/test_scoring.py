import json

import numpy as np
import pytest

from vqrank.ingest import VideoRecord
from vqrank.metrics import branch_report
from vqrank.model import ModelConfig, init_parameters, zero_parameters
from vqrank.scoring import ScoringError, score_corpus, score_record, write_scores
from vqrank.synth import SynthConfig, generate_corpus

CFG = ModelConfig(d=16, n_heads=2, d_t=8, d_f=8)


@pytest.fixture(scope="module")
def model():
    return init_parameters(CFG, np.random.default_rng(0))


@pytest.fixture(scope="module")
def records():
    # mixed frame counts exercise the grouping path
    out = []
    for m in (2, 5, 3):
        out += generate_corpus(SynthConfig(n_records=7, d_t=8, d_f=8, m=m, seed=m)).records
    return out


def test_same_record_twice(model, records):
    assert score_record(records[0], model).same_as(score_record(records[0], model))


def test_zero_parameters_give_half_and_uniform_weights(records):
    s = score_record(records[0], zero_parameters(CFG))
    assert s.score == 0.5
    np.testing.assert_array_equal(s.branch_weights, [0.25] * 4)


def test_order_preserved_and_matches_single(model, records):
    scored = score_corpus(records, model)
    assert [s.id for s in scored] == [r.id for r in records]
    for r, s in zip(records, scored):
        assert s.score == pytest.approx(score_record(r, model).score, abs=1e-6)
        assert 0 < s.score < 1
        assert s.branch_weights.sum() == pytest.approx(1.0, abs=1e-6)


def test_empty_and_duplicates(model, records):
    assert score_corpus([], model) == []
    a, b = score_corpus([records[3], records[3]], model)
    assert a.same_as(b)


def test_parallel_equals_serial(model, records):
    serial = score_corpus(records, model, workers=1, chunk_size=4)
    parallel = score_corpus(records, model, workers=3, chunk_size=4)
    assert all(a.same_as(b) for a, b in zip(serial, parallel))


def test_dimension_mismatch_names_record(model):
    bad = VideoRecord("odd-one", np.ones(9), np.ones((2, 8)), np.ones((2, 8)))
    with pytest.raises(ScoringError) as info:
        score_corpus([bad], model)
    assert info.value.record_id == "odd-one"


def test_disabled_branch_gets_zero_weight(records):
    cfg = ModelConfig(d=16, n_heads=2, d_t=8, d_f=8, branches=("vtmab", "fqab", "tqab"))
    s = score_record(records[0], init_parameters(cfg, np.random.default_rng(1)))
    assert s.branch_weights[1] == 0 and s.branch_weights.sum() == pytest.approx(1.0, abs=1e-6)


def test_output_lines(tmp_path, model, records):
    path = tmp_path / "scores.jsonl"
    write_scores(score_corpus(records, model), path)
    lines = path.read_text().splitlines()
    assert len(lines) == len(records)
    obj = json.loads(lines[0])
    assert set(obj) == {"id", "score", "branch_scores", "branch_weights"}
    assert set(obj["branch_scores"]) == {"vtmab", "fcab", "fqab", "tqab", "vtmab_global", "vtmab_local"}
    assert set(obj["branch_weights"]) == {"vtmab", "fcab", "fqab", "tqab"}


def test_untrained_report_completes(model, records):
    report = branch_report(records, model).to_json()
    assert set(report["dcg"]) == {"2", "4", "10"}
