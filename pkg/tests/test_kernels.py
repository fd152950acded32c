"""Kernel-level checks: forward values, pullbacks and backend agreement."""

import numpy as np
import pytest

from attacksearch import _kernels
from attacksearch._kernels import pure
from attacksearch.netdiff import random_mlp

from conftest import fd_jacobian, probe_away_from_kinks, relative_error, vjp_jacobian


def hand_net_params():
    # 2 -> 3 relu -> 2 id, all values chosen for exact hand evaluation
    W0 = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
    b0 = np.array([0.0, -1.0, 0.5])
    W1 = np.array([[1.0, 2.0, 0.0], [0.0, 0.0, 3.0]])
    b1 = np.array([0.0, 1.0])
    return [W0, W1], [b0, b1], [pure.ACT_RELU, pure.ACT_ID]


def test_forward_matches_hand_computation():
    Ws, bs, acts = hand_net_params()
    x = np.array([2.0, 3.0])
    # hidden: relu([2, 2, 5.5]) = [2, 2, 5.5]; out: [2+4, 1+16.5]
    out = _kernels.mlp_forward(Ws, bs, acts, x)
    np.testing.assert_array_equal(out, [6.0, 17.5])

    x = np.array([-1.0, 0.5])
    # hidden: relu([-1, -0.5, 0]) = [0, 0, 0]; out: [0, 1]
    out = _kernels.mlp_forward(Ws, bs, acts, x)
    np.testing.assert_array_equal(out, [0.0, 1.0])


def test_relu_pullback_zero_on_inactive_units():
    Ws, bs, acts = hand_net_params()
    x = np.array([-1.0, 0.5])  # every hidden unit inactive or on the kink
    g = _kernels.mlp_vjp(Ws, bs, acts, x, np.array([1.0, 1.0]))
    np.testing.assert_array_equal(g, [0.0, 0.0])


def test_softmax_forward_normalized_and_stable():
    W = np.eye(3)
    b = np.zeros(3)
    out = _kernels.mlp_forward([W], [b], [pure.ACT_SOFTMAX], np.array([0.0, 0.0, 0.0]))
    np.testing.assert_allclose(out, np.full(3, 1.0 / 3.0), rtol=1e-15)
    # max subtraction keeps huge logits finite
    out = _kernels.mlp_forward([W], [b], [pure.ACT_SOFTMAX],
                               np.array([1000.0, 1000.5, 999.0]))
    assert np.isfinite(out).all()
    assert abs(out.sum() - 1.0) < 1e-12


@pytest.mark.parametrize("dims,acts", [
    ([3, 5, 2], ["relu", "id"]),
    ([4, 4, 4, 3], ["relu", "relu", "softmax"]),
    ([2, 6, 1], ["id", "id"]),
])
def test_vjp_matches_finite_differences(dims, acts):
    rng = np.random.default_rng(0)
    net = random_mlp(rng, dims, activations=acts)
    for _ in range(4):
        x = probe_away_from_kinks(rng, net)
        err = relative_error(fd_jacobian(net, x), vjp_jacobian(net, x))
        assert err < 1e-6


def test_batched_kernels_match_single_calls():
    rng = np.random.default_rng(5)
    net = random_mlp(rng, [4, 7, 3])
    X = rng.normal(0.0, 1.0, size=(16, 4))
    U = rng.normal(0.0, 1.0, size=(16, 3))
    Y_single = np.stack([net.eval(x) for x in X])
    G_single = np.stack([net.vjp(x, u) for x, u in zip(X, U)])
    np.testing.assert_allclose(net.eval_many(X), Y_single, rtol=1e-12, atol=1e-12)
    np.testing.assert_allclose(net.vjp_many(X, U), G_single, rtol=1e-12, atol=1e-12)


@pytest.mark.skipif(_kernels.BACKEND != "compiled",
                    reason="compiled backend not importable here")
def test_backends_agree():
    from attacksearch._kernels import _mlpcore

    rng = np.random.default_rng(9)
    for dims, acts in ([5, 8, 4], ["relu", "id"]), ([3, 6, 6, 2], ["relu", "relu", "softmax"]):
        net = random_mlp(rng, dims, activations=acts)
        Ws = [W for W, _, _ in net.layers]
        bs = [b for _, b, _ in net.layers]
        codes = [getattr(pure, f"ACT_{a.upper()}") for a in acts]
        for _ in range(8):
            x = rng.normal(0.0, 1.0, size=dims[0])
            u = rng.normal(0.0, 1.0, size=dims[-1])
            np.testing.assert_allclose(
                _mlpcore.mlp_forward(Ws, bs, codes, x),
                pure.mlp_forward(Ws, bs, codes, x), rtol=1e-12, atol=1e-14)
            np.testing.assert_allclose(
                _mlpcore.mlp_vjp(Ws, bs, codes, x, u),
                pure.mlp_vjp(Ws, bs, codes, x, u), rtol=1e-12, atol=1e-14)
        # batched entry points delegate, so they agree bitwise
        X = rng.normal(0.0, 1.0, size=(12, dims[0]))
        U = rng.normal(0.0, 1.0, size=(12, dims[-1]))
        np.testing.assert_array_equal(
            _mlpcore.mlp_forward_many(Ws, bs, codes, X),
            pure.mlp_forward_many(Ws, bs, codes, X))
        np.testing.assert_array_equal(
            _mlpcore.mlp_vjp_many(Ws, bs, codes, X, U),
            pure.mlp_vjp_many(Ws, bs, codes, X, U))
