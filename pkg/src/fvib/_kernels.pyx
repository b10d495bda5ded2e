# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled Monte-Carlo predictive kernels.

Both kernels fuse sampling ``z = mean + std * noise``, the linear classifier
and the softmax into one pass per (example, sample), so no ``(S, N, d)``
intermediate is ever materialized.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, log

cnp.import_array()


def mc_softmax_mean(const double[:, ::1] mean, const double[:, ::1] std,
                    const double[:, :, ::1] noise, const double[:, ::1] weights,
                    double inv_temp):
    cdef Py_ssize_t n_samples = noise.shape[0]
    cdef Py_ssize_t n = mean.shape[0]
    cdef Py_ssize_t kappa = mean.shape[1]
    cdef Py_ssize_t d = weights.shape[0]
    cdef Py_ssize_t i, s, j, k
    cdef double top, total, acc
    out = np.zeros((n, d), dtype=np.float64)
    cdef double[:, ::1] res = out
    cdef double[::1] z = np.empty(kappa, dtype=np.float64)
    cdef double[::1] logit = np.empty(d, dtype=np.float64)
    with nogil:
        for i in range(n):
            for s in range(n_samples):
                for k in range(kappa):
                    z[k] = mean[i, k] + std[i, k] * noise[s, i, k]
                top = -1e308
                for j in range(d):
                    acc = 0.0
                    for k in range(kappa):
                        acc = acc + weights[j, k] * z[k]
                    acc = acc * inv_temp
                    logit[j] = acc
                    if acc > top:
                        top = acc
                total = 0.0
                for j in range(d):
                    logit[j] = exp(logit[j] - top)
                    total = total + logit[j]
                for j in range(d):
                    res[i, j] = res[i, j] + logit[j] / total
            for j in range(d):
                res[i, j] = res[i, j] / n_samples
    return out


def mc_log_likelihood(const double[:, ::1] mean, const double[:, ::1] std,
                      const double[:, :, ::1] noise, const double[:, ::1] weights,
                      const long long[::1] labels, double inv_temp):
    cdef Py_ssize_t n_samples = noise.shape[0]
    cdef Py_ssize_t n = mean.shape[0]
    cdef Py_ssize_t kappa = mean.shape[1]
    cdef Py_ssize_t d = weights.shape[0]
    cdef Py_ssize_t i, s, j, k
    cdef double top, total, acc, picked
    out = np.zeros(n, dtype=np.float64)
    cdef double[::1] res = out
    cdef double[::1] z = np.empty(kappa, dtype=np.float64)
    cdef double[::1] logit = np.empty(d, dtype=np.float64)
    with nogil:
        for i in range(n):
            for s in range(n_samples):
                for k in range(kappa):
                    z[k] = mean[i, k] + std[i, k] * noise[s, i, k]
                top = -1e308
                for j in range(d):
                    acc = 0.0
                    for k in range(kappa):
                        acc = acc + weights[j, k] * z[k]
                    acc = acc * inv_temp
                    logit[j] = acc
                    if acc > top:
                        top = acc
                total = 0.0
                for j in range(d):
                    total = total + exp(logit[j] - top)
                picked = logit[labels[i]]
                res[i] = res[i] + (picked - top - log(total))
            res[i] = res[i] / n_samples
    return out
