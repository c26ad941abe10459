import numpy as np
import pytest

from c2c.errors import ShapeError
from c2c.model import tensor as T
from c2c.model.tensor import Tensor, parameter


def numeric_grad(fn, x, h=1e-6):
    g = np.zeros_like(x)
    for i in range(x.size):
        old = x.flat[i]
        x.flat[i] = old + h
        up = fn(x)
        x.flat[i] = old - h
        down = fn(x)
        x.flat[i] = old
        g.flat[i] = (up - down) / (2 * h)
    return g


def test_square_grad():
    x = parameter(3.0)
    (x * x).backward()
    assert x.grad == 6.0


def test_sigmoid_grad_at_zero():
    x = parameter(0.0)
    T.sigmoid(x).backward()
    assert abs(x.grad - 0.25) < 1e-12


def test_backward_accumulates():
    x = parameter(2.0)
    (x * x).backward()
    (x * x).backward()
    assert x.grad == 8.0


def test_backward_non_scalar_rejected():
    x = parameter(np.ones(3))
    with pytest.raises(ShapeError):
        (x * 2).backward()


def test_shared_subexpression():
    x = parameter(1.5)
    y = x * x
    (y + y * x).backward()
    assert abs(x.grad - (2 * 1.5 + 3 * 1.5 ** 2)) < 1e-12


def test_non_parameter_gets_no_grad():
    x = parameter(np.ones(2))
    c = Tensor(np.array([2.0, 3.0]))
    T.tsum(x * c).backward()
    assert c.grad is None
    np.testing.assert_array_equal(x.grad, [2.0, 3.0])


UNARY = [
    (T.exp, np.random.default_rng(0).normal(size=(3, 4))),
    (T.log, np.random.default_rng(1).uniform(0.5, 2, (3, 4))),
    (T.sqrt, np.random.default_rng(2).uniform(0.5, 2, (3, 4))),
    (T.tanh, np.random.default_rng(3).normal(size=(3, 4))),
    (T.sigmoid, np.random.default_rng(4).normal(size=(3, 4))),
    (lambda a: T.softmax(a, axis=-1), np.random.default_rng(5).normal(size=(3, 4))),
    (lambda a: T.transpose(a, (1, 0)), np.random.default_rng(6).normal(size=(3, 4))),
    (lambda a: T.tmean(a, axis=0), np.random.default_rng(7).normal(size=(3, 4))),
    (lambda a: a[1:, ::2], np.random.default_rng(8).normal(size=(3, 4))),
    (lambda a: a[[0, 0, 2]], np.random.default_rng(9).normal(size=(3, 4))),
    (lambda a: a ** 3, np.random.default_rng(10).normal(size=(3, 4))),
    (lambda a: 1.0 / a, np.random.default_rng(11).uniform(0.5, 2, (3, 4))),
    (lambda a: T.concat(T.split(a, 2, axis=1)[::-1], axis=1), np.random.default_rng(12).normal(size=(3, 4))),
]


@pytest.mark.parametrize("op,x0", UNARY)
def test_op_gradients_match_finite_difference(op, x0):
    weights = np.random.default_rng(99).normal(size=op(Tensor(x0)).shape)
    x = parameter(x0.copy())
    T.tsum(op(x) * weights).backward()
    num = numeric_grad(lambda v: float(np.sum(op(Tensor(v)).data * weights)), x0.copy())
    np.testing.assert_allclose(x.grad, num, rtol=1e-6, atol=1e-8)


def test_broadcast_binary_gradients():
    rng = np.random.default_rng(13)
    a0, b0 = rng.normal(size=(2, 3, 4)), rng.normal(size=(3, 1))
    a, b = parameter(a0), parameter(b0)
    T.tsum((a - b) * b).backward()
    num_b = numeric_grad(lambda v: float(np.sum((a0 - v) * v)), b0.copy())
    np.testing.assert_allclose(b.grad, num_b, rtol=1e-6, atol=1e-8)
    np.testing.assert_allclose(a.grad, np.broadcast_to(b0, a0.shape), rtol=1e-12)


def test_linear_and_matmul_gradients():
    rng = np.random.default_rng(14)
    x0, w0, bias0 = rng.normal(size=(2, 5, 3)), rng.normal(size=(4, 3)), rng.normal(size=4)
    x, w, bias = parameter(x0), parameter(w0), parameter(bias0)
    T.tsum(T.tanh(T.linear(x, w, bias))).backward()

    def f(xv, wv, bv):
        return float(np.sum(np.tanh(xv @ wv.T + bv)))
    np.testing.assert_allclose(x.grad, numeric_grad(lambda v: f(v, w0, bias0), x0.copy()), rtol=1e-6, atol=1e-8)
    np.testing.assert_allclose(w.grad, numeric_grad(lambda v: f(x0, v, bias0), w0.copy()), rtol=1e-6, atol=1e-8)
    np.testing.assert_allclose(bias.grad, numeric_grad(lambda v: f(x0, w0, v), bias0.copy()), rtol=1e-6, atol=1e-8)
    with pytest.raises(ShapeError):
        T.matmul(parameter(np.ones((2, 3))), parameter(np.ones((2, 3))))


def test_maximum_floor_blocks_gradient():
    x = parameter(np.array([-1.0, 0.5]))
    T.tsum(T.maximum(x, 0.0)).backward()
    np.testing.assert_array_equal(x.grad, [0.0, 1.0])


def test_clip_gradient():
    x = parameter(np.array([-2.0, 0.5, 2.0]))
    T.tsum(T.clip(x, -1.0, 1.0)).backward()
    np.testing.assert_array_equal(x.grad, [0.0, 1.0, 0.0])


def test_deep_chain_does_not_recurse():
    x = parameter(1.0)
    y = x
    for _ in range(5000):
        y = y * 1.0
    y.backward()
    assert x.grad == 1.0
