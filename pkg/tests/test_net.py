import math

import numpy as np
import pytest

from fvib.errors import ConfigError, ShapeError, StateError
from fvib.net import AdamState, DenseNet, TrainConfig, adam_step, fit, minibatches
from fvib.verify import _relative_fd_error


def test_init_is_seeded_he_uniform():
    a, b = DenseNet([10, 8, 3], seed=4), DenseNet([10, 8, 3], seed=4)
    assert all(np.array_equal(x, y) for x, y in zip(a.params(), b.params()))
    bound = math.sqrt(6 / 10)
    assert np.abs(a.weights[0]).max() <= bound
    assert all(np.all(bias == 0) for bias in a.biases)
    assert a.n_params == 10 * 8 + 8 + 8 * 3 + 3


def test_forward_matches_manual(rng):
    net = DenseNet([3, 4, 2], seed=1)
    x = rng.standard_normal((5, 3))
    hidden = np.maximum(x @ net.weights[0] + net.biases[0], 0)
    np.testing.assert_allclose(net(x), hidden @ net.weights[1] + net.biases[1], atol=1e-14)


def test_backward_against_finite_differences(rng):
    net = DenseNet([3, 5, 4, 2], seed=2)
    for b in net.biases:
        b += 0.05 * rng.standard_normal(b.shape)
    x, target = rng.standard_normal((6, 3)), rng.standard_normal((6, 2))
    loss = lambda: float(np.sum((net.forward(x) - target) ** 2))
    grads = net.backward(2 * (net.forward(x) - target))
    assert _relative_fd_error(net.params(), grads, loss) < 1e-6


def test_backward_needs_forward():
    net = DenseNet([2, 2], seed=0)
    with pytest.raises(StateError):
        net.backward(np.zeros((1, 2)))
    net(np.zeros((1, 2)))
    with pytest.raises(StateError):
        net.backward(np.zeros((1, 2)))


def test_shape_errors():
    with pytest.raises(ShapeError):
        DenseNet([3])
    net = DenseNet([3, 2], seed=0)
    with pytest.raises(ShapeError):
        net(np.zeros((1, 4)))


def test_serialization_roundtrip(rng):
    net = DenseNet([3, 4, 2], seed=9)
    net.weights[0] += rng.standard_normal(net.weights[0].shape)
    copy = DenseNet.from_dict(net.to_dict())
    x = rng.standard_normal((3, 3))
    assert np.array_equal(copy(x), net(x))
    clone = net.copy()
    clone.weights[0][0, 0] += 1
    assert clone.weights[0][0, 0] != net.weights[0][0, 0]


def test_adam_first_step_is_lr_times_sign():
    p = [np.array([1.0, -2.0, 3.0])]
    g = [np.array([0.5, -4.0, 0.0])]
    state = AdamState.for_params(p, 0.1)
    adam_step(p, g, state)
    np.testing.assert_allclose(p[0], [0.9, -1.9, 3.0], atol=1e-7)


def test_adam_minimizes_quadratic():
    p = [np.array([5.0, -3.0])]
    state = AdamState.for_params(p, 0.1)
    for _ in range(2000):
        adam_step(p, [2 * p[0]], state)
    np.testing.assert_allclose(p[0], 0.0, atol=1e-3)


def test_minibatches_cover_all_and_keep_partial(rng):
    batches = list(minibatches(10, 4, rng))
    assert [len(b) for b in batches] == [4, 4, 2]
    assert sorted(np.concatenate(batches).tolist()) == list(range(10))


def test_fit_is_deterministic_given_seed(rng):
    x = rng.standard_normal((20, 2))
    y = x @ np.array([[1.0], [-2.0]])

    def run():
        net = DenseNet([2, 1], seed=0)

        def step(idx, _rng):
            out = net.forward(x[idx])
            return None, net.backward(2 * (out - y[idx]) / len(idx))

        fit(net.params(), step, 20, TrainConfig(epochs=30, batch_size=7, lr=0.05, seed=3))
        return net.weights[0].copy()

    a, b = run(), run()
    assert np.array_equal(a, b)
    np.testing.assert_allclose(a[:, 0], [1.0, -2.0], atol=0.05)


def test_config_lists_every_problem():
    with pytest.raises(ConfigError) as info:
        TrainConfig(epochs=0, lr=-1.0, lr_decay=2.0)
    assert len(info.value.problems) == 3


def test_lr_schedule():
    tc = TrainConfig(lr=1.0, lr_decay=0.5, lr_decay_every=2)
    assert [tc.lr_at(e) for e in range(5)] == [1.0, 1.0, 0.5, 0.5, 0.25]
