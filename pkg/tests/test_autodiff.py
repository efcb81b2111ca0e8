import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from vqrank import autodiff as ad
from vqrank.autodiff import Tensor

from oracles import PRIMITIVES, primitive_case


def test_forward_examples():
    a, b = Tensor(2.0), Tensor(3.0)
    assert ad.forward(a * b).data == 6.0
    assert ad.mean(Tensor([1.0, 2.0, 3.0, 4.0])).data == 2.5
    np.testing.assert_array_equal(ad.softmax(Tensor(np.zeros(4))).data, [0.25] * 4)


def test_backward_examples():
    a, b = Tensor(2.0, requires_grad=True), Tensor(3.0, requires_grad=True)
    grads = ad.backward(a * b)
    assert grads[a] == 3.0 and grads[b] == 2.0

    x = Tensor(np.arange(5.0), requires_grad=True)
    ad.backward(ad.mean(x))
    np.testing.assert_allclose(x.grad, np.full(5, 1 / 5))

    x = Tensor(0.0, requires_grad=True)
    ad.backward(ad.sigmoid(x))
    assert x.grad == pytest.approx(0.25)


def test_forward_recomputes_after_leaf_rebind():
    x = Tensor(np.array([1.0, 2.0]))
    y = ad.sum_(ad.mul(x, x))
    assert y.data == 5.0
    x.data = np.array([3.0, 0.0])
    assert ad.forward(y).data == 9.0


def test_non_scalar_root_rejected():
    with pytest.raises(ad.ContractError):
        ad.backward(Tensor(np.ones(3), requires_grad=True) * 2.0)


def test_shape_mismatch_names_primitive_and_shapes():
    with pytest.raises(ad.DimensionError, match=r"matmul.*\(2, 3\).*\(4, 5\)"):
        ad.matmul(Tensor(np.ones((2, 3))), Tensor(np.ones((4, 5))))
    with pytest.raises(ad.DimensionError, match="add"):
        ad.add(Tensor(np.ones(3)), Tensor(np.ones(4)))


def test_nonfinite_external_input_rejected():
    with pytest.raises(ad.NumericError):
        Tensor([1.0, np.nan])


def test_gradient_check_square():
    err = ad.gradient_check(lambda x: ad.mul(x, x), np.array(3.0), step=1e-3)
    assert err <= 1e-4


def test_softmax_weighted_gradient_sums_to_zero():
    c = np.array([0.3, -1.2, 2.0, 0.7])
    x = Tensor(np.array([0.1, 0.5, -0.3, 1.1]), requires_grad=True)
    ad.backward(ad.sum_(ad.mul(ad.softmax(x), c)))
    assert abs(x.grad.sum()) < 1e-12


def test_shared_leaf_accumulates_paths():
    x = Tensor(np.array([1.5, -2.0]), requires_grad=True)
    y = ad.add(ad.sum_(ad.mul(x, 3.0)), ad.sum_(ad.mul(x, x)))
    ad.backward(y)
    np.testing.assert_allclose(x.grad, 3.0 + 2 * x.data)


def test_dropout_modes():
    rng = np.random.default_rng(0)
    x = Tensor(rng.standard_normal((4, 5)))
    assert ad.dropout(x, 0.5, None, train=False) is x
    a = ad.dropout(x, 0.3, np.random.default_rng(5), train=True).data
    b = ad.dropout(x, 0.3, np.random.default_rng(5), train=True).data
    np.testing.assert_array_equal(a, b)
    kept = a != 0
    np.testing.assert_allclose(a[kept], x.data[kept] / 0.7)


@pytest.mark.parametrize("name", PRIMITIVES)
def test_primitive_gradients(name):
    for seed in range(20):
        rng = np.random.default_rng([seed, PRIMITIVES.index(name)])
        fn, points = primitive_case(name, rng)
        err = ad.gradient_check(fn, points, step=1e-3)
        assert err <= 1e-4, (name, seed, err)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-30, 30), min_size=1, max_size=8), st.integers(1, 4))
def test_softmax_rows_are_distributions(values, rows):
    x = np.tile(np.array(values), (rows, 1)) + np.arange(rows)[:, None]
    y = ad.softmax(Tensor(x)).data
    assert np.all(y > 0)
    np.testing.assert_allclose(y.sum(axis=-1), 1.0, atol=1e-9)
