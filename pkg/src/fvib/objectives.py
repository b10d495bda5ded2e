"""Likelihoods, Gaussian KL terms and the (Taylor-approximated) VIB objectives.

All evaluators are vectorized over a leading batch axis. A Gaussian encoding
stores ``mean`` with shape ``(..., k)`` and ``var`` with shape ``(...)`` for an
isotropic covariance ``var * I`` or ``(..., k)`` for a diagonal one.

The classifier is ``softmax(W z / T)`` with ``W`` of shape ``(d, k)`` and no
bias. Its log-likelihood is expanded to second order around ``z = 0`` where
the logit gradient is ``e_y - 1/d`` and the logit Hessian is ``-P`` with
``P = diag(1/d) - 11^T / d**2``.
"""

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import DomainError, EmptyInputError, ShapeError

VAR_FLOOR = 1e-12


@dataclass(frozen=True)
class GaussianEncoding:
    mean: np.ndarray
    var: np.ndarray

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=np.float64)
        var = np.asarray(self.var, dtype=np.float64)
        if mean.ndim < 1:
            raise ShapeError("mean must have a latent axis")
        if var.shape not in (mean.shape[:-1], mean.shape):
            raise ShapeError(f"variance shape {var.shape} incompatible with mean {mean.shape}")
        if np.any(var < 0) or not np.all(np.isfinite(var)):
            raise DomainError("variances must be finite and nonnegative")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "var", var)

    @property
    def dim(self):
        return self.mean.shape[-1]

    @property
    def isotropic(self):
        return self.var.ndim == self.mean.ndim - 1

    def diag_var(self):
        """Variances broadcast to the shape of ``mean``."""
        if self.isotropic:
            return np.broadcast_to(self.var[..., None], self.mean.shape)
        return self.var

    def __len__(self):
        return 1 if self.mean.ndim == 1 else self.mean.shape[0]

    def __getitem__(self, idx):
        return GaussianEncoding(self.mean[idx], self.var[idx])

    @classmethod
    def stack(cls, encodings):
        """Stack single-example encodings into one batched encoding."""
        encodings = list(encodings)
        if not encodings:
            raise EmptyInputError("no encodings to stack")
        iso = {e.isotropic for e in encodings}
        if len(iso) != 1:
            raise ShapeError("cannot stack isotropic and diagonal encodings")
        return cls(np.stack([e.mean for e in encodings]),
                   np.stack([e.var for e in encodings]))


@dataclass(frozen=True)
class Classifier:
    weights: np.ndarray
    temperature: float = 1.0

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        if w.ndim != 2:
            raise ShapeError("classifier weights must be a (d, k) matrix")
        if not self.temperature > 0:
            raise DomainError(f"temperature must be positive, got {self.temperature}")
        object.__setattr__(self, "weights", w)

    @property
    def n_classes(self):
        return self.weights.shape[0]

    @property
    def dim(self):
        return self.weights.shape[1]

    def logits(self, z):
        z = np.asarray(z, dtype=np.float64)
        if z.shape[-1] != self.dim:
            raise ShapeError(f"latent dim {z.shape[-1]} != classifier dim {self.dim}")
        return z @ self.weights.T / self.temperature


def _labels(y, batch_shape, d):
    y = np.asarray(y)
    if y.shape != batch_shape:
        y = np.broadcast_to(y, batch_shape)
    if y.size and (y.min() < 0 or y.max() >= d):
        raise IndexError(f"label out of range for d={d}")
    return y.astype(np.int64)


def _pick(arr, y):
    return np.take_along_axis(arr, y[..., None], axis=-1)[..., 0]


def log_softmax(logits):
    top = logits.max(axis=-1, keepdims=True)
    return logits - top - np.log(np.exp(logits - top).sum(axis=-1, keepdims=True))


def log_likelihood(clf, z, y):
    """``log softmax_y(W z / T)`` with a log-sum-exp shift."""
    u = clf.logits(z)
    return _pick(log_softmax(u), _labels(y, u.shape[:-1], clf.n_classes))


def _centered_quadratic(u):
    # u^T P u for P = diag(1/d) - 11^T / d**2
    d = u.shape[-1]
    return (u * u).sum(axis=-1) / d - u.sum(axis=-1) ** 2 / d**2


def taylor_log_likelihood(clf, z, y):
    """Second-order expansion of the log-likelihood around ``z = 0`` (``T = 1``)."""
    z = np.asarray(z, dtype=np.float64)
    if z.shape[-1] != clf.dim:
        raise ShapeError(f"latent dim {z.shape[-1]} != classifier dim {clf.dim}")
    d = clf.n_classes
    u = z @ clf.weights.T
    y = _labels(y, u.shape[:-1], d)
    linear = _pick(u, y) - u.mean(axis=-1)
    return -np.log(d) + linear - 0.5 * _centered_quadratic(u)


def hessian_diag(weights):
    """Diagonal of ``W^T P W``, the negated latent Hessian at zero."""
    d = weights.shape[0]
    return (weights**2).sum(axis=0) / d - weights.sum(axis=0) ** 2 / d**2


def latent_gradient(weights, y):
    """``W^T (e_y - 1/d)`` for each label in ``y``."""
    return weights[np.asarray(y)] - weights.mean(axis=0)


def latent_hessian(weights):
    d = weights.shape[0]
    p = np.eye(d) / d - np.ones((d, d)) / d**2
    return -weights.T @ p @ weights


def kl_to_standard_normal(enc):
    """``KL(N(mean, Sigma) || N(0, I))`` per example."""
    if np.any(enc.var <= 0):
        raise DomainError("KL to the prior needs strictly positive variances")
    k = enc.dim
    sq = (enc.mean**2).sum(axis=-1)
    if enc.isotropic:
        return 0.5 * (k * enc.var - k * np.log(enc.var) + sq - k)
    return 0.5 * ((enc.var - np.log(enc.var)).sum(axis=-1) + sq - k)


def expected_taylor(clf, enc, y):
    """Closed-form Gaussian expectation of :func:`taylor_log_likelihood`."""
    if enc.dim != clf.dim:
        raise ShapeError(f"encoding dim {enc.dim} != classifier dim {clf.dim}")
    d = clf.n_classes
    u = enc.mean @ clf.weights.T
    y = _labels(y, u.shape[:-1], d)
    linear = _pick(u, y) - u.mean(axis=-1)
    hdiag = hessian_diag(clf.weights)
    if enc.isotropic:
        trace = enc.var * hdiag.sum()
    else:
        trace = (enc.var * hdiag).sum(axis=-1)
    return -np.log(d) + linear - 0.5 * trace - 0.5 * _centered_quadratic(u)


def _check_beta(beta):
    if not 0.0 <= beta <= 1.0:
        raise DomainError(f"beta must lie in [0, 1], got {beta}")


def _batched(enc, y):
    if enc.mean.ndim == 1:
        enc = GaussianEncoding(enc.mean[None], enc.var[None])
    y = np.atleast_1d(np.asarray(y))
    if enc.mean.shape[0] == 0:
        raise EmptyInputError("objective over an empty set of encodings")
    if y.shape != (enc.mean.shape[0],):
        raise ShapeError("one label per encoding required")
    return enc, y


def _kl_term(enc, beta):
    # beta = 0 drops the KL entirely so the degenerate zero covariance is allowed
    if beta == 0.0:
        return 0.0
    return beta * kl_to_standard_normal(enc)


def taylor_vib_objective(enc, y, clf, beta):
    """Taylor-approximated VIB objective averaged over the batch."""
    _check_beta(beta)
    enc, y = _batched(enc, y)
    per_example = expected_taylor(clf, enc, y) - _kl_term(enc, beta)
    return float(np.sum(per_example) / per_example.shape[0])


def mc_log_likelihood(enc, y, clf, samples, seed=None, noise=None):
    """Per-example Monte-Carlo mean of ``log q(y | z)`` with ``z`` drawn from ``enc``."""
    if samples < 1:
        raise DomainError(f"need at least one sample, got {samples}")
    enc, y = _batched(enc, y)
    if noise is None:
        rng = np.random.default_rng(seed)
        noise = rng.standard_normal((samples,) + enc.mean.shape)
    std = np.sqrt(enc.diag_var())
    return kernels.mc_log_likelihood(enc.mean, std, noise, clf.weights, y, clf.temperature)


def mc_vib_objective(enc, y, clf, beta, samples, seed=None):
    """Monte-Carlo estimate of the VIB objective."""
    _check_beta(beta)
    ll = mc_log_likelihood(enc, y, clf, samples, seed)
    enc, y = _batched(enc, y)
    per_example = ll - _kl_term(enc, beta)
    return float(np.sum(per_example) / per_example.shape[0])


def label_entropy(y, d=None):
    """Empirical label entropy in nats."""
    counts = np.bincount(np.asarray(y), minlength=d or 0)
    p = counts[counts > 0] / counts.sum()
    return float(-(p * np.log(p)).sum())


def ib_bounds(enc, y, clf, samples, seed=None):
    """``(prediction_bound, compression_bound)`` in nats.

    The prediction bound adds the empirical label entropy to the mean sampled
    log-likelihood. Zero variances (the deterministic ``beta = 0`` model) are
    floored at ``VAR_FLOOR`` for the compression bound only.
    """
    ll = mc_log_likelihood(enc, y, clf, samples, seed)
    enc, y = _batched(enc, y)
    prediction = float(np.sum(ll) / ll.shape[0]) + label_entropy(y, clf.n_classes)
    floored = GaussianEncoding(enc.mean, np.maximum(enc.var, VAR_FLOOR))
    kl = kl_to_standard_normal(floored)
    return prediction, float(np.sum(kl) / kl.shape[0])


def optimal_solution(targets, y, beta):
    """The closed-form maximizer of the Taylor VIB objective for labels ``y``.

    Returns ``(encoding, classifier)`` with means ``sqrt(1-beta) t_y``,
    isotropic variance ``beta`` and weights ``sqrt(1-beta) L^T``.
    """
    _check_beta(beta)
    y = np.asarray(y)
    scale = np.sqrt(1.0 - beta)
    enc = GaussianEncoding(scale * targets.targets[y], np.full(y.shape, float(beta)))
    return enc, Classifier(scale * targets.l_matrix.T)
