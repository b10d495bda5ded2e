import math

import numpy as np
import pytest

from fvib.data import synth_blobs
from fvib.errors import DataError, DomainError
from fvib.net import DenseNet, TrainConfig
from fvib.simplex import build_target_matrix
from fvib.trainer import (ct_temperature, fvib_loss, fvib_objective, instantiate,
                          taylor_optimal_confidence, train)
from fvib.verify import _relative_fd_error


@pytest.mark.parametrize("d, expected", [(2, 0.880797), (10, 0.999591)])
def test_taylor_optimal_confidence_values(d, expected):
    assert taylor_optimal_confidence(d) == pytest.approx(expected, abs=1e-6)


def test_ct_temperature_reference_value():
    assert ct_temperature(10, 0.997) == pytest.approx(1.2495, abs=1e-3)


def test_ct_temperature_domain():
    with pytest.raises(DomainError):
        ct_temperature(3, 0.2)
    with pytest.raises(DomainError):
        ct_temperature(3, 1.0)


def test_fvib_loss_gradients(rng):
    tm = build_target_matrix(4)
    net = DenseNet([3, 6, 3], seed=1)
    x = rng.standard_normal((8, 3))
    y = np.arange(8) % 4
    loss, grads = fvib_loss(net, x, y, tm)
    assert loss == pytest.approx(-fvib_objective(net(x), y, tm))
    err = _relative_fd_error(net.params(), grads, lambda: fvib_loss(net, x, y, tm)[0])
    assert err < 1e-6


def test_fvib_loss_rejects_bad_labels():
    tm = build_target_matrix(3)
    with pytest.raises(DataError):
        fvib_loss(DenseNet([2, 2]), np.zeros((1, 2)), np.array([3]), tm)


def test_training_reduces_loss(blobs):
    net, tm, hist = train(blobs, TrainConfig(epochs=30, batch_size=30, lr=3e-3), hidden=(16,))
    assert hist.loss[-1] < 0.2 * hist.loss[0]
    assert len(hist.rows()) == 31 and hist.rows()[0][0] == 0


def test_training_rejects_unbalanced():
    ds = synth_blobs(3, 10, seed=0)
    unbalanced = ds.subset(np.arange(25))
    with pytest.raises(DataError):
        train(unbalanced, TrainConfig(epochs=1))
    net, _, _ = train(unbalanced, TrainConfig(epochs=1), hidden=(4,), strict=False)
    assert net.output_dim == 2


def test_instantiation_wiring(rng):
    tm = build_target_matrix(3)
    net = DenseNet([2, 2], seed=0)
    h = rng.standard_normal((4, 2))
    m = instantiate(net, tm, 0.36, ct_enabled=False)
    enc = m.encode(h=h)
    np.testing.assert_allclose(enc.mean, 0.8 * h)
    np.testing.assert_allclose(enc.var, 0.36)
    np.testing.assert_allclose(m.weights, 0.8 * tm.l_matrix.T)


def test_beta_one_is_uniform_and_beta_zero_deterministic(rng):
    tm = build_target_matrix(4)
    net = DenseNet([2, 3], seed=0)
    h = rng.standard_normal((5, 3))
    assert np.array_equal(instantiate(net, tm, 1.0).predict(h=h), np.full((5, 4), 0.25))
    m0 = instantiate(net, tm, 0.0)
    assert np.array_equal(m0.predict(h=h, seed=1), m0.predict(h=h, seed=2))


def test_ct_gives_target_confidence_at_training_targets(target_matrix):
    net = DenseNet([1, target_matrix.d - 1])
    m = instantiate(net, target_matrix, 0.0, ct_enabled=True, c=0.99)
    probs = m.predict(h=target_matrix.targets)
    np.testing.assert_allclose(np.diag(probs), 0.99, atol=1e-12)
    plain = instantiate(net, target_matrix, 0.0, ct_enabled=False).predict(h=target_matrix.targets)
    np.testing.assert_allclose(np.diag(plain), taylor_optimal_confidence(target_matrix.d), atol=1e-12)


def test_predict_seeded_reproducible(rng):
    tm = build_target_matrix(3)
    m = instantiate(DenseNet([2, 2]), tm, 0.4)
    h = rng.standard_normal((6, 2))
    p = m.predict(h=h, seed=5, samples=12)
    assert np.array_equal(p, m.predict(h=h, seed=5, samples=12))
    np.testing.assert_allclose(p.sum(axis=1), 1.0, atol=1e-12)


def test_instantiate_validates():
    tm = build_target_matrix(3)
    net = DenseNet([2, 2])
    for kwargs in ({"beta": -0.1}, {"beta": 1.5}, {"beta": 0.5, "samples": 0},
                   {"beta": 0.5, "c": 0.2}):
        with pytest.raises(DomainError):
            instantiate(net, tm, **kwargs)
    assert math.isclose(instantiate(net, tm, 0.5).at(0.25).beta, 0.25)
