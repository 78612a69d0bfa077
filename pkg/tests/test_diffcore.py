import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import deepsurrogate.diffcore as dc
from oracles import numgrad, rel_err

RNG = np.random.default_rng(1234)


def _away(x, lo=0.2):
    # keep |x| >= lo so kinks (relu, abs) are not straddled by the finite difference
    return np.where(x >= 0, x + lo, x - lo)


# name -> (fn, input arrays factory, smooth)
CASES = {
    "add": (lambda a, b: a + b, lambda: [RNG.normal(size=(3, 4)), RNG.normal(size=(4,))], True),
    "sub": (lambda a, b: a - b, lambda: [RNG.normal(size=(3, 1)), RNG.normal(size=(3, 4))], True),
    "mul": (lambda a, b: a * b, lambda: [RNG.normal(size=(2, 3)), RNG.normal(size=(2, 3))], True),
    "div": (lambda a, b: a / b, lambda: [RNG.normal(size=(2, 3)), 1.5 + RNG.random((2, 3))], True),
    "square": (dc.square, lambda: [RNG.normal(size=(5,))], True),
    "sqrt": (dc.sqrt, lambda: [0.5 + RNG.random((5,))], True),
    "exp": (dc.exp, lambda: [RNG.normal(size=(2, 3))], True),
    "log": (dc.log, lambda: [0.5 + RNG.random((4,))], True),
    "tanh": (dc.tanh, lambda: [RNG.normal(size=(4,))], True),
    "sigmoid": (dc.sigmoid, lambda: [RNG.normal(size=(4,))], True),
    "leaky_relu": (lambda a: dc.leaky_relu(a, 0.1), lambda: [_away(RNG.normal(size=(6,)))], True),
    "relu": (dc.relu, lambda: [_away(RNG.normal(size=(6,)))], True),
    "abs": (dc.ops.abs, lambda: [_away(RNG.normal(size=(6,)))], True),
    "softmax": (lambda a: dc.softmax(a, axis=1), lambda: [RNG.normal(size=(2, 5))], False),
    "log_softmax": (lambda a: dc.log_softmax(a, axis=0), lambda: [RNG.normal(size=(4, 3))], False),
    "sum_axis": (lambda a: dc.sum(dc.square(a), axis=1, keepdims=True), lambda: [RNG.normal(size=(3, 4))], True),
    "mean": (lambda a: dc.mean(dc.exp(a), axis=0), lambda: [RNG.normal(size=(3, 4))], True),
    "reshape": (lambda a: dc.reshape(dc.tanh(a), (6, 2)), lambda: [RNG.normal(size=(3, 4))], True),
    "transpose": (lambda a: dc.transpose(dc.square(a), (2, 0, 1)), lambda: [RNG.normal(size=(2, 3, 4))], True),
    "getitem": (lambda a: dc.square(a[1:, ::2]), lambda: [RNG.normal(size=(3, 5))], True),
    "fancy_index": (lambda a: dc.square(a[np.array([0, 2, 0])]), lambda: [RNG.normal(size=(3, 2))], True),
    "concat": (lambda a, b: dc.concat([dc.square(a), b], axis=1), lambda: [RNG.normal(size=(2, 3)), RNG.normal(size=(2, 2))], True),
    "matmul": (lambda a, b: dc.tanh(a @ b), lambda: [RNG.normal(size=(3, 4)), RNG.normal(size=(4, 2))], True),
    "matmul_vec": (lambda a, b: dc.square(a @ b), lambda: [RNG.normal(size=(4,)), RNG.normal(size=(4, 2))], True),
    "matmul_batched": (lambda a, b: dc.tanh(a @ b), lambda: [RNG.normal(size=(2, 3, 4)), RNG.normal(size=(4, 5))], True),
    "affine": (lambda x, w, b: dc.tanh(dc.affine(x, w, b)), lambda: [RNG.normal(size=(3, 4)), RNG.normal(size=(4, 2)), RNG.normal(size=(2,))], True),
    "conv1d": (lambda x, w, b: dc.tanh(dc.conv1d(x, w, b, padding=1)), lambda: [RNG.normal(size=(2, 3, 6)), RNG.normal(size=(4, 3, 3)), RNG.normal(size=(4,))], True),
    "conv1d_stride": (lambda x, w: dc.square(dc.conv1d(x, w, stride=2)), lambda: [RNG.normal(size=(1, 2, 7)), RNG.normal(size=(3, 2, 3))], True),
    "conv1d_1d": (lambda x, w: dc.square(dc.conv1d(x, w)), lambda: [RNG.normal(size=(7,)), RNG.normal(size=(3,))], True),
    "l2norm": (lambda a: dc.l2norm(a), lambda: [RNG.normal(size=(3, 4))], True),
    "mse": (lambda a, b: dc.mse(a, b), lambda: [RNG.normal(size=(5,)), RNG.normal(size=(5,))], True),
}


def _scalarize(fn, xs, w=None):
    out = fn(*xs)
    if w is None:
        w = np.random.default_rng(7).normal(size=out.shape)
    return dc.sum(dc.mul(out, w)), w


@pytest.mark.parametrize("name", sorted(CASES))
def test_first_order_matches_finite_differences(name):
    fn, make, _ = CASES[name]
    arrays = make()
    xs = [dc.tensor(a, requires_grad=True) for a in arrays]
    loss, w = _scalarize(fn, xs)
    grads = dc.grad(loss, xs)
    for x, g in zip(xs, grads):
        num = numgrad(lambda: float(_scalarize(fn, xs, w)[0].data), x.data)
        assert rel_err(g.data, num) < 1e-5, name


@pytest.mark.parametrize("name", sorted(n for n, c in CASES.items() if c[2]))
def test_second_order_matches_finite_differences(name):
    fn, make, _ = CASES[name]
    arrays = make()
    xs = [dc.tensor(a, requires_grad=True) for a in arrays]
    _, w = _scalarize(fn, xs)
    vs = [np.random.default_rng(11 + i).normal(size=a.shape) for i, a in enumerate(arrays)]

    def directional(create_graph):
        loss, _ = _scalarize(fn, xs, w)
        gs = dc.grad(loss, xs, create_graph=create_graph)
        return dc.ops.sum(dc.concat([dc.reshape(dc.mul(g, v), (-1,)) for g, v in zip(gs, vs)], axis=0))

    hv = dc.grad(directional(True), xs)
    for x, g in zip(xs, hv):
        num = numgrad(lambda: float(directional(False).data), x.data)
        assert rel_err(g.data, num, floor=1e-6) < 1e-4, name


def test_gradient_penalty_parameter_gradient():
    # d/dW of (||d/dx sum tanh(xW)|| - 1)^2, the shape of the surrogate penalty
    rng = np.random.default_rng(3)
    x = dc.tensor(rng.normal(size=(4, 3)), requires_grad=True)
    W = dc.tensor(rng.normal(size=(3, 5)), requires_grad=True)

    def penalty():
        gx = dc.grad_graph(dc.sum(dc.tanh(x @ W)), x)
        return dc.sum(dc.square(dc.l2norm(gx) - 1.0))

    (gW,) = dc.grad(penalty(), [W])
    num = numgrad(lambda: float(penalty().data), W.data)
    assert rel_err(gW.data, num) < 1e-4


def test_softmax_is_first_order_only():
    x = dc.tensor(RNG.normal(size=(2, 3)), requires_grad=True)
    loss = dc.sum(dc.square(dc.softmax(x)))
    dc.grad(loss, [x])
    with pytest.raises(dc.UnsupportedOpError) as err:
        dc.grad(loss, [x], create_graph=True)
    assert "softmax" in str(err.value)


def test_relu_second_derivative_is_zero():
    x = dc.tensor(_away(RNG.normal(size=(5,))), requires_grad=True)
    g = dc.grad_graph(dc.sum(dc.relu(x)), x)
    (h,) = dc.grad(dc.sum(g), [x])
    assert np.all(h.data == 0.0)


def test_unused_variable_gets_zero_gradient():
    x = dc.tensor([1.0, 2.0], requires_grad=True)
    y = dc.tensor([3.0], requires_grad=True)
    gx, gy = dc.grad(dc.sum(dc.square(x)), [x, y])
    np.testing.assert_array_equal(gx.data, [2.0, 4.0])
    np.testing.assert_array_equal(gy.data, [0.0])


def test_gradient_of_intermediate_node():
    x = dc.tensor([0.3, -0.2], requires_grad=True)
    h = dc.tanh(x)
    gh, gx = dc.grad(dc.sum(dc.square(h)), [h, x])
    np.testing.assert_allclose(gh.data, 2 * np.tanh(x.data))
    np.testing.assert_allclose(gx.data, 2 * np.tanh(x.data) * (1 - np.tanh(x.data) ** 2))


def test_non_scalar_root_rejected():
    x = dc.tensor([1.0, 2.0], requires_grad=True)
    with pytest.raises(ValueError):
        dc.grad(dc.square(x), [x])


def test_shape_errors():
    with pytest.raises(dc.ShapeError):
        dc.matmul(dc.tensor(np.ones((2, 3))), dc.tensor(np.ones((2, 3))))
    with pytest.raises(dc.ShapeError):
        dc.conv1d(dc.tensor(np.ones((1, 1, 2))), dc.tensor(np.ones((1, 1, 5))))
    with pytest.raises(dc.ShapeError):
        dc.add(dc.tensor(np.ones(3)), dc.tensor(np.ones(4)))


def test_no_grad_records_nothing():
    x = dc.tensor([1.0, 2.0], requires_grad=True)
    with dc.no_grad():
        y = dc.square(x)
    assert not y.requires_grad and y.is_leaf
    z = dc.square(x)
    assert z.requires_grad and not z.is_leaf


def test_forward_returns_value():
    x = dc.tensor([1.0, 4.0])
    np.testing.assert_array_equal(dc.forward(dc.sqrt(x)), [1.0, 2.0])


def test_conv1d_matches_numpy_correlate():
    x = RNG.normal(size=9)
    k = RNG.normal(size=3)
    out = dc.conv1d(dc.tensor(x), dc.tensor(k)).data
    np.testing.assert_allclose(out, np.correlate(x, k, mode="valid"), atol=1e-12)


def test_topological_order_is_acyclic_and_complete():
    x = dc.tensor([1.0], requires_grad=True)
    y = x
    for _ in range(2000):  # deep chain; iterative traversal must not hit recursion limits
        y = dc.tanh(y)
    (g,) = dc.grad(dc.sum(y), [x])
    assert np.isfinite(g.data).all()
    order = dc.ops._topo(y)
    pos = {id(n): i for i, n in enumerate(order)}
    assert all(pos[id(p)] < pos[id(n)] for n in order for p in n.parents)


@settings(max_examples=40, deadline=None)
@given(
    a=st.floats(-3, 3, allow_nan=False),
    b=st.floats(-3, 3, allow_nan=False),
    seed=st.integers(0, 2**16),
)
def test_gradient_is_linear(a, b, seed):
    rng = np.random.default_rng(seed)
    x = dc.tensor(rng.normal(size=(3, 2)), requires_grad=True)

    def f():
        return dc.sum(dc.tanh(x))

    def g():
        return dc.sum(dc.square(x))

    combo = dc.add(dc.scale(f(), a), dc.scale(g(), b))
    (gc,) = dc.grad(combo, [x])
    (gf,) = dc.grad(f(), [x])
    (gg,) = dc.grad(g(), [x])
    np.testing.assert_allclose(gc.data, a * gf.data + b * gg.data, rtol=1e-12, atol=1e-12)


def test_gradients_are_bitwise_deterministic():
    def run():
        rng = np.random.default_rng(5)
        x = dc.tensor(rng.normal(size=(2, 3, 8)), requires_grad=True)
        w = dc.tensor(rng.normal(size=(4, 3, 3)), requires_grad=True)
        gx = dc.grad_graph(dc.sum(dc.tanh(dc.conv1d(x, w, padding=1))), x)
        return dc.grad(dc.sum(dc.square(dc.l2norm(gx) - 1)), [w])[0].data

    assert run().tobytes() == run().tobytes()


# --- parameters and optimizers ------------------------------------------------


def _params():
    ps = dc.ParamSet()
    ps.add("w", np.array([1.0, -2.0]))
    ps.add("b", np.array([0.5]))
    return ps


def test_sgd_step():
    ps = _params()
    dc.SGD(ps, lr=0.1).step({"w": np.array([1.0, 1.0]), "b": np.array([-2.0])})
    np.testing.assert_allclose(ps["w"].data, [0.9, -2.1])
    np.testing.assert_allclose(ps["b"].data, [0.7])


def test_adam_first_step_moves_by_lr():
    # bias-corrected first Adam step is lr * sign(g) up to eps
    ps = _params()
    dc.Adam(ps, lr=0.01).step({"w": np.array([3.0, -0.5]), "b": np.array([2.0])})
    np.testing.assert_allclose(ps["w"].data, [0.99, -1.99], atol=1e-8)
    np.testing.assert_allclose(ps["b"].data, [0.49], atol=1e-8)


def test_backward_accumulates_and_state_roundtrip():
    ps = _params()
    loss = dc.sum(dc.square(ps["w"])) + dc.sum(ps["b"])
    dc.backward(loss, ps)
    dc.backward(dc.sum(dc.square(ps["w"])) + dc.sum(ps["b"]), ps)
    np.testing.assert_allclose(ps.grads["w"], [4.0, -8.0])
    np.testing.assert_allclose(ps.grads["b"], [2.0])
    before = ps.checksum()
    state = {k: v.copy() for k, v in ps.state().items()}
    ps["w"].data = ps["w"].data + 1
    assert ps.checksum() != before
    ps.load_state(state)
    assert ps.checksum() == before


def test_unknown_optimizer():
    with pytest.raises(ValueError):
        dc.make_optimizer("rmsprop", _params(), 0.1)
