"""Beta-free training of the feature extractor and per-beta model instantiation."""

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .data import ensure_balanced
from .errors import DataError, DomainError, EmptyInputError
from .net import DenseNet, fit
from .objectives import Classifier, GaussianEncoding, taylor_vib_objective
from .simplex import build_target_matrix

DEFAULT_CONFIDENCE = 0.997


def fvib_loss(net, x, y, targets):
    """Mean squared distance of ``h(x_i)`` to the class targets, with parameter gradients.

    The loss is ``-J`` restricted to the batch.
    """
    y = np.asarray(y)
    if y.size == 0:
        raise EmptyInputError("empty batch")
    if y.min() < 0 or y.max() >= targets.d:
        raise DataError(f"label out of range for d={targets.d}")
    out = net.forward(x)
    diff = out - targets.targets[y]
    loss = float(np.sum(diff * diff) / y.size)
    return loss, net.backward(2.0 * diff / y.size)


def fvib_objective(h, y, targets):
    """``J = -(1/N) sum ||h_i - t_{y_i}||^2`` for precomputed outputs ``h``."""
    diff = np.asarray(h) - targets.targets[np.asarray(y)]
    return -float(np.sum(diff * diff) / diff.shape[0])


@dataclass
class TrainHistory:
    loss: list
    objective: list

    def rows(self):
        return [(e, l, j) for e, (l, j) in enumerate(zip(self.loss, self.objective))]


def train(ds, config, hidden=(128, 128), strict=True, on_epoch=None):
    """Fit ``h`` to the simplex targets of ``ds`` by Adam on the squared error.

    Returns ``(net, targets, history)``; ``history`` holds the train-set loss
    and ``J`` at initialization and after every epoch. ``on_epoch(epoch, net)``
    is an optional hook.
    """
    if len(ds) == 0:
        raise EmptyInputError("empty training set")
    ds = ensure_balanced(ds, strict=strict, seed=config.seed)
    targets = build_target_matrix(ds.d)
    net = DenseNet([ds.n_features, *hidden, ds.d - 1], seed=config.seed)
    x, y = ds.features, ds.labels
    history = TrainHistory([], [])

    def step(idx, rng):
        return fvib_loss(net, x[idx], y[idx], targets)

    def record(epoch):
        j = fvib_objective(net(x), y, targets)
        history.loss.append(-j)
        history.objective.append(j)
        if on_epoch is not None:
            on_epoch(epoch + 1, net)

    record(-1)
    fit(net.params(), step, len(ds), config, on_epoch=record)
    return net, targets, history


def ct_temperature(d, c=DEFAULT_CONFIDENCE):
    """Temperature at which the Taylor-optimal logits give confidence ``c``."""
    if d < 2:
        raise DomainError(f"need d >= 2, got {d}")
    if not 1.0 / d < c < 1.0:
        raise DomainError(f"confidence must lie in (1/d, 1) = ({1.0 / d:.6g}, 1), got {c}")
    return d / math.log((d - 1) * c / (1.0 - c))


def taylor_optimal_confidence(d):
    """Confidence of the maximizer of the Taylor log-likelihood, ``e^d / (e^d + d - 1)``."""
    return 1.0 / (1.0 + (d - 1) * math.exp(-d))


def _check_beta(beta):
    if not 0.0 <= beta <= 1.0:
        raise DomainError(f"beta must lie in [0, 1], got {beta}")


@dataclass(frozen=True)
class FvibModel:
    """A trained extractor evaluated at one ``beta``.

    Mean ``sqrt(1-beta) h(x)``, covariance ``beta I`` and classifier weights
    ``sqrt(1-beta) L^T``; none of these are learned.
    """

    net: DenseNet
    targets: object
    beta: float
    ct_enabled: bool = True
    confidence: float = DEFAULT_CONFIDENCE
    samples: int = 30

    @property
    def d(self):
        return self.targets.d

    @property
    def scale(self):
        return math.sqrt(1.0 - self.beta)

    @property
    def weights(self):
        return self.scale * self.targets.l_matrix.T

    @property
    def temperature(self):
        return ct_temperature(self.d, self.confidence) if self.ct_enabled else 1.0

    def at(self, beta):
        """The same trained extractor instantiated at another ``beta``."""
        return instantiate(self.net, self.targets, beta, self.ct_enabled, self.confidence,
                           self.samples)

    def classifier(self, tempered=None):
        """Classifier at this ``beta``; ``tempered`` overrides the CT flag."""
        use_ct = self.ct_enabled if tempered is None else tempered
        t = ct_temperature(self.d, self.confidence) if use_ct else 1.0
        return Classifier(self.weights, t)

    def mean(self, x=None, h=None):
        h = self.net(x) if h is None else np.asarray(h)
        return self.scale * h

    def encode(self, x=None, h=None):
        mu = self.mean(x, h)
        return GaussianEncoding(mu, np.full(mu.shape[:-1], float(self.beta)))

    def noise(self, n, samples=None, seed=None):
        s = self.samples if samples is None else samples
        return np.random.default_rng(seed).standard_normal((s, n, self.d - 1))

    def predict(self, x=None, seed=None, samples=None, h=None, noise=None):
        """Average of ``softmax(W z_s / T)`` over ``z_s = mean + sqrt(beta) eps_s``.

        ``h`` may be passed instead of ``x`` to reuse extractor outputs and
        ``noise`` (shape ``(S, N, d-1)``) to fix the draws across calls.
        """
        mu = self.mean(x, h)
        single = mu.ndim == 1
        mu = np.atleast_2d(mu)
        n = mu.shape[0]
        s = self.samples if samples is None else samples
        if s < 1:
            raise DomainError(f"need at least one sample, got {s}")
        if self.beta == 1.0:
            probs = np.full((n, self.d), 1.0 / self.d)
        elif self.beta == 0.0:
            logits = mu @ self.weights.T / self.temperature
            logits -= logits.max(axis=1, keepdims=True)
            probs = np.exp(logits)
            probs /= probs.sum(axis=1, keepdims=True)
        else:
            if noise is None:
                noise = self.noise(n, s, seed)
            probs = kernels.mc_softmax_mean(mu, math.sqrt(self.beta), noise,
                                            self.weights, self.temperature)
        return probs[0] if single else probs

    def taylor_objective(self, x=None, y=None, h=None):
        return taylor_vib_objective(self.encode(x, h), y, self.classifier(False), self.beta)


def instantiate(net, targets, beta, ct_enabled=True, c=DEFAULT_CONFIDENCE, samples=30):
    """Wire the per-beta mean, covariance, classifier and CT temperature; no training."""
    _check_beta(beta)
    if ct_enabled:
        ct_temperature(targets.d, c)
    if samples < 1:
        raise DomainError(f"need at least one sample, got {samples}")
    return FvibModel(net, targets, float(beta), bool(ct_enabled), float(c), int(samples))

