import numpy as np
import pytest

from fvib.baseline import (CrossEntropyModel, VibEncoder, ce_loss_and_grads, ce_train,
                           compression_bound, make_encoder, taylor_loss_and_grads, taylor_train,
                           vib_loss_and_grads, vib_train)
from fvib.errors import DomainError
from fvib.net import DenseNet, TrainConfig
from fvib.verify import _relative_fd_error


@pytest.fixture
def encoder(rng):
    enc = make_encoder(4, 3, 0.2, kappa=2, hidden=(5,), seed=0)
    enc.net.weights[-1][:, 2:] = 0.2 * rng.standard_normal((5, 2))
    return enc


def test_encoder_starts_at_unit_variance(rng):
    enc = make_encoder(4, 3, 0.1, hidden=(5,), seed=0)
    assert enc.kappa == 2
    assert np.all(enc.encode(rng.standard_normal((3, 4))).var == 1.0)


def test_taylor_gradients(encoder, rng):
    x, y = rng.standard_normal((6, 4)), rng.integers(0, 3, 6)
    _, grads = taylor_loss_and_grads(encoder, x, y, 0.2)
    err = _relative_fd_error(encoder.params(), grads,
                             lambda: taylor_loss_and_grads(encoder, x, y, 0.2)[0])
    assert err < 1e-5


def test_taylor_loss_equals_negated_objective(encoder, rng):
    x, y = rng.standard_normal((6, 4)), rng.integers(0, 3, 6)
    loss, _ = taylor_loss_and_grads(encoder, x, y, 0.2)
    assert loss == pytest.approx(-encoder.taylor_objective(x, y), abs=1e-12)


def test_vib_loss_with_zero_noise_is_deterministic_ce_plus_kl(encoder, rng):
    x, y = rng.standard_normal((5, 4)), rng.integers(0, 3, 5)
    loss, _ = vib_loss_and_grads(encoder, x, y, 0.0, np.zeros((5, 2)))
    mu, _ = encoder.heads(x)
    logits = mu @ encoder.weights.T
    ref = -np.mean(logits[np.arange(5), y] - np.log(np.exp(logits).sum(axis=1)))
    assert loss == pytest.approx(ref, abs=1e-12)


def test_ce_gradients(rng):
    net = DenseNet([3, 4, 3], seed=0)
    x, y = rng.standard_normal((5, 3)), rng.integers(0, 3, 5)
    _, grads = ce_loss_and_grads(net, x, y)
    assert _relative_fd_error(net.params(), grads, lambda: ce_loss_and_grads(net, x, y)[0]) < 1e-5


@pytest.mark.parametrize("trainer", [vib_train, taylor_train])
def test_trainers_improve_taylor_objective(blobs, trainer):
    enc, hist = trainer(blobs, 0.01, TrainConfig(epochs=80, batch_size=40, lr=3e-3), hidden=(16,))
    assert len(hist.objective) == 81
    assert hist.objective[-1] > hist.objective[0]
    probs = enc.predict(blobs.features, seed=0, samples=5)
    assert np.mean(probs.argmax(axis=1) == blobs.labels) > 0.9
    assert compression_bound(enc, blobs.features) > 0


def test_beta_validation(blobs):
    with pytest.raises(DomainError):
        vib_train(blobs, None, TrainConfig(epochs=1))
    with pytest.raises(DomainError):
        taylor_train(blobs, 1.2, TrainConfig(epochs=1))


def test_encoder_roundtrip(encoder, rng):
    back = VibEncoder.from_dict(encoder.to_dict())
    x = rng.standard_normal((2, 4))
    assert np.array_equal(back.predict(x, seed=1), encoder.predict(x, seed=1))


def test_ce_train_and_temperature(blobs):
    model, losses = ce_train(blobs, TrainConfig(epochs=10, batch_size=40, lr=3e-3), hidden=(8,))
    assert len(losses) == 10 and losses[-1] < losses[0]
    p1, p2 = model.predict(blobs.features), model.predict(blobs.features, temperature=3.0)
    assert p2.max(axis=1).mean() < p1.max(axis=1).mean()
    back = CrossEntropyModel.from_dict(model.to_dict())
    assert np.array_equal(back.logits(blobs.features), model.logits(blobs.features))
