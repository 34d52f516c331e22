import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from thzirs.channel import RngStream
from thzirs.errors import DomainError, ShapeError
from thzirs.neuralnet import (AdamState, Layer, MlpParams, adam_step, backward, forward, load_params,
                              mlp_init, save_params, soft_update)


def loss_of(params, x, weights):
    out, _ = forward(params, x)
    return float(np.sum(out * weights))


def fd_param_grads(params, x, weights, h=1e-6):
    grads = []
    for arr in params.arrays():
        g = np.zeros_like(arr)
        for idx in np.ndindex(arr.shape):
            old = arr[idx]
            arr[idx] = old + h
            up = loss_of(params, x, weights)
            arr[idx] = old - h
            down = loss_of(params, x, weights)
            arr[idx] = old
            g[idx] = (up - down) / (2 * h)
        grads.append(g)
    return grads


def assert_grads_close(analytic, numeric, rel=1e-4):
    for a, n in zip(analytic, numeric):
        scale = max(np.max(np.abs(n)), 1e-8)
        assert np.max(np.abs(a - n)) / scale <= rel


def test_init_shapes_and_bounds():
    p = mlp_init([3, 128, 128, 36], ["relu", "relu", "tanh"], RngStream(0, 0))
    assert p.sizes == [3, 128, 128, 36]
    assert [l.w.shape for l in p.layers] == [(128, 3), (128, 128), (36, 128)]
    for layer, fan_in in zip(p.layers, (3, 128, 128)):
        assert np.all(np.abs(layer.w) <= 1 / np.sqrt(fan_in))
        assert np.all(layer.b == 0)
    assert p.n_params() == 3 * 128 + 128 + 128 * 128 + 128 + 128 * 36 + 36


def test_init_deterministic():
    a = mlp_init([4, 8, 2], "tanh", RngStream(5, 1))
    b = mlp_init([4, 8, 2], "tanh", RngStream(5, 1))
    for x, y in zip(a.arrays(), b.arrays()):
        np.testing.assert_array_equal(x, y)


@pytest.mark.parametrize("sizes,acts", [([3], "relu"), ([3, 0, 1], "relu"), ([3, 4, 1], ["relu"]),
                                        ([3, 4], ["sigmoid"])])
def test_init_rejects(sizes, acts):
    with pytest.raises(DomainError):
        mlp_init(sizes, acts, np.random.default_rng(0))


def test_params_shape_validation():
    with pytest.raises(ShapeError):
        MlpParams([Layer(np.zeros((2, 3)), np.zeros(2)), Layer(np.zeros((1, 4)), np.zeros(1))])


def test_forward_identity_linear():
    p = MlpParams([Layer(np.eye(2), np.zeros(2), "linear")])
    out, _ = forward(p, [1.0, -2.0])
    np.testing.assert_array_equal(out, [1.0, -2.0])


def test_forward_straight_line_oracle(gen):
    p = mlp_init([4, 5, 3], ["relu", "tanh"], gen)
    x = gen.standard_normal(4)
    h = [max(0.0, sum(p.layers[0].w[j, i] * x[i] for i in range(4)) + p.layers[0].b[j]) for j in range(5)]
    y = [np.tanh(sum(p.layers[1].w[j, i] * h[i] for i in range(5)) + p.layers[1].b[j]) for j in range(3)]
    out, _ = forward(p, x)
    np.testing.assert_allclose(out, y, rtol=1e-12)


def test_forward_batch_matches_rows(gen):
    p = mlp_init([4, 6, 2], ["relu", "linear"], gen)
    xb = gen.standard_normal((7, 4))
    out, _ = forward(p, xb)
    for i in range(7):
        np.testing.assert_allclose(out[i], forward(p, xb[i])[0], rtol=1e-13)


def test_forward_shape_error(gen):
    with pytest.raises(ShapeError):
        forward(mlp_init([4, 2], "relu", gen), np.zeros(3))


def test_tanh_output_bounded(gen):
    p = mlp_init([3, 8, 5], ["relu", "tanh"], gen)
    out, _ = forward(p, 1e6 * gen.standard_normal((20, 3)))
    assert np.all(np.abs(out) <= 1.0)


def test_gradient_check_reference_net(gen):
    p = mlp_init([4, 8, 8, 2], ["relu", "tanh", "linear"], gen)
    for layer in p.layers:
        layer.b[:] = 0.1 * gen.standard_normal(layer.b.shape)
    x = gen.standard_normal((3, 4))
    w = gen.standard_normal((3, 2))
    out, cache = forward(p, x)
    grads, gin = backward(p, cache, w)
    assert_grads_close(grads.arrays(), fd_param_grads(p, x, w))
    # input gradient
    num = np.zeros_like(x)
    for idx in np.ndindex(x.shape):
        xp, xm = x.copy(), x.copy()
        xp[idx] += 1e-6
        xm[idx] -= 1e-6
        num[idx] = (loss_of(p, xp, w) - loss_of(p, xm, w)) / 2e-6
    assert_grads_close([gin], [num])


@given(st.integers(0, 2**31 - 1))
def test_prop_gradient_random_nets(seed):
    g = np.random.default_rng(seed)
    depth = int(g.integers(1, 4))
    sizes = [int(s) for s in g.integers(1, 6, depth + 1)]
    acts = [str(a) for a in g.choice(["tanh", "linear", "relu"], depth)]
    p = mlp_init(sizes, acts, g)
    x = g.standard_normal(sizes[0])
    w = g.standard_normal(sizes[-1])
    _, cache = forward(p, x)
    # skip relu kinks within the finite-difference stencil
    if any(a == "relu" and np.min(np.abs(z)) < 1e-4 for a, z in zip(acts, cache.pre)):
        return
    grads, _ = backward(p, cache, w)
    assert_grads_close(grads.arrays(), fd_param_grads(p, x, w))


def test_relu_subgradient_zero_at_kink():
    p = MlpParams([Layer(np.array([[1.0]]), np.array([0.0]), "relu")])
    _, cache = forward(p, [0.0])
    grads, gin = backward(p, cache, [1.0])
    assert gin[0] == 0.0 and grads.layers[0].w[0, 0] == 0.0 and grads.layers[0].b[0] == 0.0


def test_backward_switches(gen):
    p = mlp_init([3, 4, 2], "tanh", gen)
    _, cache = forward(p, gen.standard_normal(3))
    g, gin = backward(p, cache, np.ones(2), param_grads=False)
    assert g is None and gin.shape == (3,)
    g, gin = backward(p, cache, np.ones(2), input_grad=False)
    assert gin is None and g.sizes == p.sizes
    with pytest.raises(ShapeError):
        backward(p, cache, np.ones(3))


def test_adam_first_step_is_sign(gen):
    p = mlp_init([3, 4, 2], "tanh", gen)
    grads = p.with_arrays([gen.standard_normal(a.shape) for a in p.arrays()])
    new, state = adam_step(p, grads, AdamState.fresh(p), 1e-3)
    for old, g, upd in zip(p.arrays(), grads.arrays(), new.arrays()):
        np.testing.assert_allclose(upd - old, -1e-3 * np.sign(g), rtol=1e-6)
    assert state.step == 1


def test_adam_zero_gradient_no_move(gen):
    p = mlp_init([3, 4, 2], "tanh", gen)
    new, _ = adam_step(p, p.zeros_like(), AdamState.fresh(p), 1e-2)
    for a, b in zip(p.arrays(), new.arrays()):
        np.testing.assert_array_equal(a, b)


def test_adam_deterministic_and_pure(gen):
    p = mlp_init([3, 4, 2], "tanh", gen)
    grads = p.with_arrays([gen.standard_normal(a.shape) for a in p.arrays()])
    before = [a.copy() for a in p.arrays()]
    s0 = AdamState.fresh(p)
    a1, _ = adam_step(p, grads, s0, 1e-3)
    a2, _ = adam_step(p, grads, s0, 1e-3)
    for x, y, z in zip(a1.arrays(), a2.arrays(), before):
        np.testing.assert_array_equal(x, y)
    for x, y in zip(p.arrays(), before):
        np.testing.assert_array_equal(x, y)
    with pytest.raises(DomainError):
        adam_step(p, grads, s0, 0.0)


def test_adam_minimises_quadratic():
    p = MlpParams([Layer(np.array([[5.0, -3.0]]), np.array([2.0]), "linear")])
    state = AdamState.fresh(p)
    for _ in range(3000):
        p, state = adam_step(p, p, state, 1e-2)  # gradient of 0.5 * |theta|^2
    assert max(np.max(np.abs(a)) for a in p.arrays()) < 1e-2


def test_soft_update_examples(gen):
    a = mlp_init([2, 3], "linear", gen)
    b = a.with_arrays([x + 1.0 for x in a.arrays()])
    half = soft_update(a, b, 0.5)
    for x, y in zip(half.arrays(), a.arrays()):
        np.testing.assert_allclose(x, y + 0.5)
    for x, y in zip(soft_update(a, b, 0.0).arrays(), a.arrays()):
        np.testing.assert_array_equal(x, y)
    full = soft_update(a, b, 1.0)
    for x, y in zip(full.arrays(), b.arrays()):
        np.testing.assert_array_equal(x, y)
    with pytest.raises(DomainError):
        soft_update(a, b, 1.5)


def test_npz_round_trip_bit_exact(tmp_path, gen):
    p = mlp_init([3, 5, 2], ["relu", "tanh"], gen)
    grads = p.with_arrays([gen.standard_normal(a.shape) for a in p.arrays()])
    p, state = adam_step(p, grads, AdamState.fresh(p), 1e-3)
    save_params(tmp_path / "net.npz", p, state)
    q, s2 = load_params(tmp_path / "net.npz")
    assert q.activations == p.activations
    for x, y in zip(p.arrays() + state.m + state.v, q.arrays() + s2.m + s2.v):
        assert x.tobytes() == y.tobytes()
    assert s2.step == 1
    save_params(tmp_path / "bare.npz", p)
    assert load_params(tmp_path / "bare.npz")[1] is None
