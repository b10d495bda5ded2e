"""Per-beta comparators: VIB with the reparameterization trick, direct training of the
Taylor-approximated VIB objective, and a plain cross-entropy classifier."""

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import DomainError, EmptyInputError
from .net import DenseNet, fit
from .objectives import (Classifier, GaussianEncoding, kl_to_standard_normal, log_softmax,
                         taylor_vib_objective)


def _check_beta(beta):
    if beta is None or not 0.0 <= beta <= 1.0:
        raise DomainError(f"beta must lie in [0, 1], got {beta}")


@dataclass
class VibEncoder:
    """Diagonal-Gaussian encoder (mean and log-variance heads) plus a bias-free classifier."""

    net: DenseNet
    weights: np.ndarray
    beta: float
    method: str = "vib"

    @property
    def kappa(self):
        return self.weights.shape[1]

    @property
    def d(self):
        return self.weights.shape[0]

    def heads(self, x, record=False):
        out = self.net.forward(x, record=record)
        return out[..., :self.kappa], out[..., self.kappa:]

    def encode(self, x):
        mu, logvar = self.heads(x)
        return GaussianEncoding(mu, np.exp(logvar))

    def classifier(self):
        return Classifier(self.weights)

    def params(self):
        return self.net.params() + [self.weights]

    def predict(self, x, seed=None, samples=30, noise=None):
        mu, logvar = self.heads(x)
        if noise is None:
            noise = np.random.default_rng(seed).standard_normal((samples,) + mu.shape)
        return kernels.mc_softmax_mean(mu, np.exp(0.5 * logvar), noise, self.weights)

    def taylor_objective(self, x, y):
        return taylor_vib_objective(self.encode(x), y, self.classifier(), self.beta)

    def to_dict(self):
        return {"net": self.net.to_dict(), "classifier": self.weights.tolist(),
                "beta": self.beta, "method": self.method}

    @classmethod
    def from_dict(cls, data):
        return cls(DenseNet.from_dict(data["net"]), np.array(data["classifier"], dtype=np.float64),
                   float(data["beta"]), data.get("method", "vib"))


def make_encoder(n_features, d, beta, kappa=None, hidden=(128, 128), seed=0, method="vib"):
    """Fresh encoder whose log-variance head starts at exactly zero (unit variance)."""
    kappa = d - 1 if kappa is None else kappa
    net = DenseNet([n_features, *hidden, 2 * kappa], seed=seed)
    net.weights[-1][:, kappa:] = 0.0
    rng = np.random.default_rng([seed, 1])
    limit = 1.0 / math.sqrt(kappa)
    weights = rng.uniform(-limit, limit, size=(d, kappa))
    return VibEncoder(net, weights, float(beta), method)


def vib_loss_and_grads(enc, x, y, beta, eps):
    """Negated single-sample VIB objective for frozen noise ``eps`` and its gradients.

    ``z = mu + exp(logvar / 2) * eps``; returns ``(loss, grads)`` with grads
    ordered like ``enc.params()``.
    """
    y = np.asarray(y)
    b = y.size
    mu, logvar = enc.heads(x, record=True)
    var = np.exp(logvar)
    sigma = np.exp(0.5 * logvar)
    z = mu + sigma * eps
    logits = z @ enc.weights.T
    logp = log_softmax(logits)
    kl = 0.5 * (var - logvar + mu * mu - 1.0).sum(axis=1)
    loss = float(np.sum(-logp[np.arange(b), y] + beta * kl) / b)
    r = np.exp(logp)
    r[np.arange(b), y] -= 1.0
    r /= b
    grad_w = r.T @ z
    dz = r @ enc.weights
    d_mu = dz + beta * mu / b
    d_logvar = 0.5 * dz * eps * sigma + 0.5 * beta * (var - 1.0) / b
    grads = enc.net.backward(np.hstack([d_mu, d_logvar]))
    return loss, grads + [grad_w]


def taylor_loss_and_grads(enc, x, y, beta):
    """Negated Taylor-approximated VIB objective (analytic expectation) and its gradients."""
    y = np.asarray(y)
    b = y.size
    d = enc.d
    w = enc.weights
    mu, logvar = enc.heads(x, record=True)
    var = np.exp(logvar)
    u = mu @ w.T
    pu = u / d - u.sum(axis=1, keepdims=True) / d**2
    g = -np.full((b, d), 1.0 / d)
    g[np.arange(b), y] += 1.0
    hdiag = (w**2).sum(axis=0) / d - w.sum(axis=0) ** 2 / d**2
    kl = 0.5 * (var - logvar + mu * mu - 1.0).sum(axis=1)
    objective = (-math.log(d) + (g * u).sum(axis=1) - 0.5 * (u * pu).sum(axis=1)
                 - 0.5 * var @ hdiag - beta * kl)
    loss = -float(np.sum(objective) / b)
    resid = g - pu
    d_mu = -(resid @ w - beta * mu) / b
    d_logvar = (0.5 * var * hdiag + 0.5 * beta * (var - 1.0)) / b
    pw = w / d - w.sum(axis=0, keepdims=True) / d**2
    grad_w = -(resid.T @ mu - pw * var.sum(axis=0)) / b
    grads = enc.net.backward(np.hstack([d_mu, d_logvar]))
    return loss, grads + [grad_w]


@dataclass
class BaselineHistory:
    objective: list


def _train_encoder(ds, beta, config, kappa, hidden, method, step_fn, on_epoch):
    _check_beta(beta)
    if len(ds) == 0:
        raise EmptyInputError("empty training set")
    enc = make_encoder(ds.n_features, ds.d, beta, kappa, hidden, config.seed, method)
    x, y = ds.features, ds.labels
    history = BaselineHistory([])

    def record(epoch):
        history.objective.append(enc.taylor_objective(x, y))
        if on_epoch is not None:
            on_epoch(epoch + 1, enc)

    record(-1)
    fit(enc.params(), lambda idx, rng: step_fn(enc, x[idx], y[idx], rng), len(ds), config,
        on_epoch=record)
    return enc, history


def vib_train(ds, beta, config, kappa=None, hidden=(128, 128), on_epoch=None):
    """Train encoder and classifier on the sampled VIB objective (one draw per step).

    ``history.objective`` tracks the Taylor-approximated objective on the
    training set, for comparison with the other trainers.
    """
    def step(enc, x, y, rng):
        eps = rng.standard_normal((y.size, enc.kappa))
        return vib_loss_and_grads(enc, x, y, beta, eps)

    return _train_encoder(ds, beta, config, kappa, hidden, "vib", step, on_epoch)


def taylor_train(ds, beta, config, kappa=None, hidden=(128, 128), on_epoch=None):
    """Train encoder and classifier directly on the Taylor-approximated VIB objective."""
    def step(enc, x, y, rng):
        return taylor_loss_and_grads(enc, x, y, beta)

    return _train_encoder(ds, beta, config, kappa, hidden, "taylor", step, on_epoch)


def compression_bound(enc, x):
    return float(np.mean(kl_to_standard_normal(enc.encode(x))))


@dataclass
class CrossEntropyModel:
    """Deterministic softmax classifier; the uncalibrated reference for temperature scaling."""

    net: DenseNet
    temperature: float = 1.0

    @property
    def d(self):
        return self.net.output_dim

    def logits(self, x):
        return self.net(x)

    def predict(self, x, temperature=None):
        t = self.temperature if temperature is None else temperature
        return np.exp(log_softmax(self.logits(x) / t))

    def to_dict(self):
        return {"net": self.net.to_dict(), "temperature": self.temperature}

    @classmethod
    def from_dict(cls, data):
        return cls(DenseNet.from_dict(data["net"]), float(data.get("temperature", 1.0)))


def ce_loss_and_grads(net, x, y):
    y = np.asarray(y)
    b = y.size
    logp = log_softmax(net.forward(x))
    loss = -float(np.sum(logp[np.arange(b), y]) / b)
    r = np.exp(logp)
    r[np.arange(b), y] -= 1.0
    return loss, net.backward(r / b)


def ce_train(ds, config, hidden=(128, 128)):
    """Plain cross-entropy training; returns ``(model, per-epoch train losses)``."""
    if len(ds) == 0:
        raise EmptyInputError("empty training set")
    net = DenseNet([ds.n_features, *hidden, ds.d], seed=config.seed)
    x, y = ds.features, ds.labels
    losses = []

    def record(epoch):
        logp = log_softmax(net(x))
        losses.append(-float(np.mean(logp[np.arange(len(y)), y])))

    fit(net.params(), lambda idx, rng: ce_loss_and_grads(net, x[idx], y[idx]), len(ds), config,
        on_epoch=record)
    return CrossEntropyModel(net), losses
