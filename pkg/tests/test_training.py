import numpy as np
import pytest

from vqrank import autodiff as ad
from vqrank.aggregation import LossConfig
from vqrank.encoder import leaf_tensors
from vqrank.ingest import QualityGrade as G, VideoRecord
from vqrank.model import ModelConfig, init_parameters
from vqrank.synth import SynthConfig, generate_corpus
from vqrank.training import AdamState, TrainConfig, adam_step, batch_loss, split_indices, train

SMALL = ModelConfig(d=16, n_heads=2)


@pytest.fixture(scope="module")
def corpus():
    return generate_corpus(SynthConfig(n_records=120, d_t=12, d_f=12, m=4)).records


def _config(**kw):
    base = dict(epochs=2, batch_size=16, learning_rate=1e-3, model=SMALL)
    return TrainConfig(**{**base, **kw})


def test_adam_first_step_is_lr_sized():
    params = {"w": np.array([0.5])}
    state = AdamState.zeros_like(params)
    adam_step(params, {"w": np.array([1.0])}, state, 1e-3)
    assert params["w"][0] - 0.5 == pytest.approx(-0.001 / (1 + 1e-8), rel=1e-9)
    before = params["w"][0]
    adam_step(params, {"w": np.array([1.0])}, state, 1e-3)
    assert abs(params["w"][0] - before) <= 0.001 / (1 + 1e-8) + 1e-15
    assert state.step == 2


def test_adam_zero_gradient_leaves_params():
    params = {"w": np.array([0.5, -2.0])}
    state = AdamState.zeros_like(params)
    adam_step(params, {"w": np.zeros(2)}, state, 1e-2)
    np.testing.assert_array_equal(params["w"], [0.5, -2.0])


def test_adam_refuses_non_finite_gradient():
    params = {"a": np.array([1.0]), "b": np.array([2.0])}
    state = AdamState.zeros_like(params)
    with pytest.raises(ad.NumericError):
        adam_step(params, {"a": np.array([0.3]), "b": np.array([np.inf])}, state, 1e-2)
    assert params["a"][0] == 1.0 and state.step == 0 and state.m["a"][0] == 0


def test_zero_learning_rate_keeps_parameters(corpus):
    init = init_parameters(ModelConfig.from_dict({**SMALL.to_dict(), "d_t": 12, "d_f": 12}),
                           np.random.default_rng(0))
    result = train(corpus, _config(learning_rate=0.0, epochs=1), init=init)
    assert result.params.same_as(init)


def test_training_is_deterministic(corpus):
    a = train(corpus, _config())
    b = train(corpus, _config())
    assert a.params.same_as(b.params)
    assert a.state.same_as(b.state)
    assert a.history == b.history
    c = train(corpus, _config(seed=8))
    assert not a.params.same_as(c.params)


def test_every_tensor_moves_after_one_step(corpus):
    cfg = ModelConfig.from_dict({**SMALL.to_dict(), "d_t": 12, "d_f": 12})
    init = init_parameters(cfg, np.random.default_rng(0))
    result = train(corpus[:16], _config(epochs=1, val_fraction=0.0), init=init)
    unchanged = [n for n in init.names() if np.array_equal(init[n], result.params[n])]
    assert unchanged == []


def test_loss_decreases(corpus):
    history = train(corpus, _config(epochs=8)).history
    assert history[-1]["train_loss"] < history[0]["train_loss"]
    assert set(history[0]) == {"epoch", "train_loss", "val_pnr", "val_auc"}


def test_equal_grades_warn_and_train_pointwise(corpus):
    same = [VideoRecord(r.id, r.text_embedding, r.frame_embeddings, r.cover_embeddings, G.FAIR) for r in corpus[:20]]
    with pytest.warns(RuntimeWarning):
        result = train(same, _config(epochs=1, val_fraction=0.0))
    assert result.pairwise_degenerate


def test_split_is_a_partition():
    tr, va = split_indices(50, 0.1, np.random.default_rng(0))
    assert len(va) == 5
    assert sorted(np.concatenate([tr, va]).tolist()) == list(range(50))


def test_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(learning_rate=-1e-4)
    with pytest.raises(ValueError):
        TrainConfig(dropout=1.0)


def test_whole_model_gradient_check():
    cfg = ModelConfig(d=8, n_heads=2, d_t=4, d_f=4)
    params = init_parameters(cfg, np.random.default_rng(3), dtype=np.float64)
    rng = np.random.default_rng(4)
    records = [
        VideoRecord(f"g{i}", rng.standard_normal(4), rng.standard_normal((3, 4)), rng.standard_normal((2, 4)), g)
        for i, g in enumerate([G.EXCELLENT, G.BAD])
    ]
    names = params.names()
    loss_cfg = LossConfig()

    def fn(*leaves):
        tensors = dict(zip(names, leaves))
        loss, _ = batch_loss(tensors, records, cfg, loss_cfg)
        return loss

    err = ad.gradient_check(fn, [params[n] for n in names], step=1e-5)
    assert err <= 1e-3


def test_gradients_flow_into_every_tensor():
    cfg = ModelConfig(d=8, n_heads=2, d_t=4, d_f=4)
    params = init_parameters(cfg, np.random.default_rng(3), dtype=np.float64)
    rng = np.random.default_rng(5)
    records = [
        VideoRecord(f"g{i}", rng.standard_normal(4), rng.standard_normal((m, 4)), rng.standard_normal((2, 4)), g)
        for i, (m, g) in enumerate([(3, G.GOOD), (5, G.BAD), (3, G.FAIR)])
    ]
    tensors = leaf_tensors(params, requires_grad=True)
    loss, _ = batch_loss(tensors, records, cfg, LossConfig())
    ad.backward(loss)
    assert all(t.grad is not None and np.any(t.grad != 0) for t in tensors.values())
