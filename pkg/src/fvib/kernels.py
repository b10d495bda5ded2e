"""Hot Monte-Carlo kernels, compiled when available.

The Cython extension ``fvib._kernels`` is used if it was built; otherwise the
numpy versions in ``fvib._kernels_py`` are used. Setting the environment
variable ``FVIB_PURE_PYTHON=1`` forces the fallback. ``BACKEND`` names the
active implementation.

The compiled loops compute each logit as a scalar dot product, which loses
to a BLAS matrix product once ``d * k`` is large; above ``COMPILED_MAX_WORK``
the numpy path is used even when the extension is available.
"""

import os

import numpy as np

from . import _kernels_py

if os.environ.get("FVIB_PURE_PYTHON", "") not in ("", "0"):
    _impl = _kernels_py
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl
        BACKEND = "cython"
    except ImportError:
        _impl = _kernels_py
        BACKEND = "python"


COMPILED_MAX_WORK = 1024


def _select(impl, weights):
    if impl is not None:
        return impl
    if weights.shape[0] * weights.shape[1] > COMPILED_MAX_WORK:
        return _kernels_py
    return _impl


def _prepare(mean, std, noise, weights):
    mean = np.ascontiguousarray(mean, dtype=np.float64)
    std = np.ascontiguousarray(np.broadcast_to(std, mean.shape), dtype=np.float64)
    noise = np.ascontiguousarray(noise, dtype=np.float64)
    weights = np.ascontiguousarray(weights, dtype=np.float64)
    if mean.ndim != 2 or noise.ndim != 3 or noise.shape[1:] != mean.shape:
        raise ValueError(
            f"noise {noise.shape} must be (S,) + mean shape {mean.shape}")
    if weights.ndim != 2 or weights.shape[1] != mean.shape[1]:
        raise ValueError(f"weights {weights.shape} do not match latent dim {mean.shape[1]}")
    return mean, std, noise, weights


def mc_softmax_mean(mean, std, noise, weights, temperature=1.0, impl=None):
    """Average of ``softmax(W z_s / T)`` over samples ``z_s = mean + std * noise[s]``.

    ``mean`` is ``(N, k)``, ``std`` broadcasts to it, ``noise`` is ``(S, N, k)``
    and ``weights`` is ``(d, k)``. Returns ``(N, d)`` probabilities.
    """
    mean, std, noise, weights = _prepare(mean, std, noise, weights)
    return _select(impl, weights).mc_softmax_mean(mean, std, noise, weights, 1.0 / temperature)


def mc_log_likelihood(mean, std, noise, weights, labels, temperature=1.0, impl=None):
    """Per-example sample mean of ``log softmax_y(W z_s / T)``, shape ``(N,)``."""
    mean, std, noise, weights = _prepare(mean, std, noise, weights)
    labels = np.ascontiguousarray(labels, dtype=np.int64)
    if labels.shape != (mean.shape[0],):
        raise ValueError("one label per example required")
    return _select(impl, weights).mc_log_likelihood(
        mean, std, noise, weights, labels, 1.0 / temperature)
