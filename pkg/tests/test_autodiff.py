import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dialpolicy.autodiff import (
    Adam,
    Graph,
    NonFiniteError,
    SGD,
    ShapeError,
    Tensor,
    add,
    backward,
    concat,
    div,
    exp,
    log,
    log_softmax,
    matmul,
    mean,
    mul,
    neg,
    reshape,
    sigmoid,
    softmax,
    sqrt,
    sub,
    take_slice,
    tanh,
    transpose,
    tsum,
)
from dialpolicy.autodiff import Rng
from oracles import numeric_grad, rel_error

TRIALS = 100


def grad_error(fn, *arrays, rng):
    """Max relative error between tape and central-difference gradients of sum(w * fn(...))."""
    leaves = [Tensor(a.copy(), requires_grad=True) for a in arrays]
    out_shape = fn(*[Tensor(a) for a in arrays]).shape
    w = rng.normal(out_shape)

    with Graph() as g:
        loss = tsum(fn(*leaves) * w)
    g.backward(loss)

    worst = 0.0
    for leaf in leaves:
        x = leaf.data.copy()

        def f(x=x, leaf=leaf):
            args = [Tensor(x) if l is leaf else Tensor(l.data) for l in leaves]
            return float(np.sum(fn(*args).data * w))

        worst = max(worst, rel_error(leaf.grad, numeric_grad(f, x)))
    return worst


def _shape(rng, ndim=2):
    return tuple(int(s) for s in rng.integers(1, 5, size=ndim))


UNARY = {
    "neg": (neg, lambda r, s: r.normal(s)),
    "exp": (exp, lambda r, s: r.normal(s)),
    "log": (log, lambda r, s: r.uniform(s, 0.5, 3.0)),
    "sqrt": (sqrt, lambda r, s: r.uniform(s, 0.5, 3.0)),
    "tanh": (tanh, lambda r, s: r.normal(s)),
    "sigmoid": (sigmoid, lambda r, s: r.normal(s, scale=3.0)),
    "softmax": (softmax, lambda r, s: r.normal(s, scale=2.0)),
    "log_softmax": (log_softmax, lambda r, s: r.normal(s, scale=2.0)),
    "softmax_axis0": (lambda x: softmax(x, axis=0), lambda r, s: r.normal(s)),
    "sum_all": (lambda x: tsum(x), lambda r, s: r.normal(s)),
    "sum_axis": (lambda x: tsum(x, axis=1), lambda r, s: r.normal(s)),
    "sum_keepdims": (lambda x: tsum(x, axis=0, keepdims=True), lambda r, s: r.normal(s)),
    "mean": (lambda x: mean(x, axis=-1), lambda r, s: r.normal(s)),
    "transpose": (transpose, lambda r, s: r.normal(s)),
    "reshape": (lambda x: reshape(x, (-1,)), lambda r, s: r.normal(s)),
    "slice": (lambda x: take_slice(x, 0, 1, axis=1), lambda r, s: r.normal(s)),
}


@pytest.mark.parametrize("name", sorted(UNARY))
def test_unary_ops_match_finite_differences(name):
    fn, draw = UNARY[name]
    rng = Rng(11).spawn(name)
    worst = max(grad_error(fn, draw(rng, _shape(rng)), rng=rng) for _ in range(TRIALS))
    assert worst < 1e-4


BINARY = {
    "add": add,
    "sub": sub,
    "mul": mul,
    "div": div,
}


@pytest.mark.parametrize("name", sorted(BINARY))
@pytest.mark.parametrize("broadcast", [False, True])
def test_binary_ops_match_finite_differences(name, broadcast):
    fn = BINARY[name]
    rng = Rng(12).spawn(name).spawn(int(broadcast))
    worst = 0.0
    for _ in range(TRIALS):
        s = _shape(rng)
        s2 = (1, s[1]) if broadcast else s
        a = rng.normal(s)
        b = rng.uniform(s2, 0.5, 2.0) if name == "div" else rng.normal(s2)
        worst = max(worst, grad_error(fn, a, b, rng=rng))
    assert worst < 1e-4


def test_matmul_and_concat_match_finite_differences():
    rng = Rng(13)
    worst = 0.0
    for _ in range(TRIALS):
        n, k, p = (int(x) for x in rng.integers(1, 5, size=3))
        worst = max(worst, grad_error(matmul, rng.normal((n, k)), rng.normal((k, p)), rng=rng))
        worst = max(worst, grad_error(lambda a, b: concat([a, b], axis=1),
                                      rng.normal((n, k)), rng.normal((n, p)), rng=rng))
    assert worst < 1e-4


def test_composite_expression_with_reuse():
    rng = Rng(14)

    def fn(x, w):
        h = tanh(x @ w)
        return log_softmax(h * h + sigmoid(h) - h / 3.0)

    worst = max(grad_error(fn, rng.normal((3, 4)), rng.normal((4, 5)), rng=rng) for _ in range(TRIALS))
    assert worst < 1e-4


def test_shape_errors_name_the_op():
    with pytest.raises(ShapeError, match="matmul"):
        matmul(Tensor(np.ones((2, 3))), Tensor(np.ones((2, 3))))
    with pytest.raises(ShapeError, match="add"):
        add(Tensor(np.ones((2, 3))), Tensor(np.ones((4, 3))))


def test_non_finite_forward_raises():
    with pytest.raises(NonFiniteError):
        log(Tensor(np.array([0.0, 1.0])))
    with pytest.raises(NonFiniteError):
        exp(Tensor(np.array([1e4])))


def test_no_graph_means_no_recording():
    x = Tensor(np.ones(3), requires_grad=True)
    y = tsum(x * 2.0)
    with pytest.raises(ValueError):
        backward(y)


def test_unreached_leaves_get_zero_gradient():
    a = Tensor(np.ones(2), requires_grad=True)
    b = Tensor(np.ones(2), requires_grad=True)
    with Graph() as g:
        loss = tsum(a * 3.0)
        _ = tsum(b * a)
    g.backward(loss)
    np.testing.assert_array_equal(a.grad, [3.0, 3.0])
    np.testing.assert_array_equal(b.grad, [0.0, 0.0])


def test_backward_is_bit_reproducible():
    rng = Rng(15)
    x0, w0 = rng.normal((4, 6)), rng.normal((6, 3))
    grads = []
    for _ in range(2):
        x, w = Tensor(x0, requires_grad=True), Tensor(w0, requires_grad=True)
        with Graph() as g:
            h = tanh(x @ w)
            loss = mean(log_softmax(h + h * h))
        g.backward(loss)
        grads.append((x.grad.tobytes(), w.grad.tobytes()))
    assert grads[0] == grads[1]


def test_fan_out_accumulates():
    x = Tensor(np.array([2.0]), requires_grad=True)
    with Graph() as g:
        loss = tsum(x * x + x * 3.0 + x)
    g.backward(loss)
    np.testing.assert_allclose(x.grad, [2 * 2.0 + 3.0 + 1.0])


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-30, 30), min_size=1, max_size=8))
def test_softmax_is_a_distribution(values):
    p = softmax(Tensor(np.array(values))).data
    assert np.all(p >= 0)
    assert abs(p.sum() - 1.0) < 1e-12
    lp = log_softmax(Tensor(np.array(values))).data
    np.testing.assert_allclose(np.exp(lp), p, atol=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.floats(-700, 700))
def test_sigmoid_is_stable(z):
    s = sigmoid(Tensor(np.array([z]))).data[0]
    assert 0.0 <= s <= 1.0


def test_optimizers_descend_a_quadratic():
    for make in (lambda p: SGD(p, lr=0.1), lambda p: Adam(p, lr=0.1)):
        w = Tensor(np.array([3.0, -2.0]), requires_grad=True)
        opt = make({"w": w})
        for _ in range(200):
            with Graph() as g:
                loss = tsum(w * w)
            g.backward(loss)
            opt.step()
        assert np.abs(w.data).max() < 1e-2


def test_optimizer_rejects_non_finite_gradient():
    w = Tensor(np.array([1.0]), requires_grad=True)
    opt = SGD({"w": w}, lr=0.1)
    w.grad = np.array([np.nan])
    with pytest.raises(NonFiniteError, match="w"):
        opt.step()
