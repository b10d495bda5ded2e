"""Constant class-target matrix and the regular-simplex geometry of its targets.

The matrix ``gamma`` is the negative Hessian of the truncated log-softmax at
zero logits, ``gamma_inv = d (I + 11^T)`` its inverse, and ``k_factor`` any
square root with ``K^T K = gamma_inv``. The target matrix is ``L = [K | 0]``
and class ``k`` is regressed onto ``t_k = L (e_k - 1/d)``.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, NumericError


def _check_classes(d):
    if int(d) != d or d < 2:
        raise DomainError(f"invalid class count {d!r}: need an integer >= 2")
    return int(d)


def build_gamma(d):
    d = _check_classes(d)
    m = d - 1
    return np.eye(m) / d - np.ones((m, m)) / d**2


def build_gamma_inv(d):
    """Return the ``(d-1, d-1)`` matrix with ``2d`` on the diagonal and ``d`` elsewhere."""
    d = _check_classes(d)
    m = d - 1
    return d * (np.eye(m) + np.ones((m, m)))


def helmert_basis(m):
    """Orthonormal basis of ``R^m`` whose first column is ``1/sqrt(m)``.

    Remaining columns are the Helmert contrasts, each with a positive first
    component, spanning the complement of the all-ones direction.
    """
    basis = np.zeros((m, m))
    basis[:, 0] = 1.0 / np.sqrt(m)
    for j in range(1, m):
        col = np.zeros(m)
        col[:j] = 1.0
        col[j] = -float(j)
        basis[:, j] = col / np.sqrt(j * (j + 1))
    return basis


def _canonical_signs(vecs):
    # first nonzero component of each eigenvector made positive
    vecs = vecs.copy()
    for j in range(vecs.shape[1]):
        nz = np.flatnonzero(np.abs(vecs[:, j]) > 1e-14)
        if nz.size and vecs[nz[0], j] < 0:
            vecs[:, j] = -vecs[:, j]
    return vecs


def jacobi_eigh(a, tol=1e-14, max_sweeps=64):
    """Cyclic Jacobi eigendecomposition of a symmetric matrix.

    Returns ``(eigenvalues, eigenvectors)`` sorted by descending eigenvalue,
    eigenvector signs fixed so that the first nonzero component is positive.
    Raises :class:`NumericError` if off-diagonal mass does not fall below
    ``tol * ||a||_F`` within ``max_sweeps`` sweeps.
    """
    a = np.array(a, dtype=np.float64)
    n = a.shape[0]
    if a.shape != (n, n):
        raise ValueError("jacobi_eigh needs a square matrix")
    v = np.eye(n)
    scale = max(np.linalg.norm(a), 1.0)
    sweep = 0
    while True:
        off = np.sqrt(np.sum(np.tril(a, -1) ** 2))
        if off <= tol * scale:
            break
        if sweep >= max_sweeps:
            raise NumericError("Jacobi eigensolver did not converge", iterations=sweep)
        sweep += 1
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) < 1e-300:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0))
                if theta == 0.0:
                    t = 1.0
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                # a <- R^T a R with R the (p, q) plane rotation
                ap, aq = a[:, p].copy(), a[:, q].copy()
                a[:, p], a[:, q] = c * ap - s * aq, s * ap + c * aq
                ap, aq = a[p, :].copy(), a[q, :].copy()
                a[p, :], a[q, :] = c * ap - s * aq, s * ap + c * aq
                vp, vq = v[:, p].copy(), v[:, q].copy()
                v[:, p], v[:, q] = c * vp - s * vq, s * vp + c * vq
    vals = np.diag(a).copy()
    order = np.argsort(-vals, kind="stable")
    return vals[order], _canonical_signs(v[:, order])


@dataclass(frozen=True)
class TargetMatrix:
    d: int
    gamma: np.ndarray
    gamma_inv: np.ndarray
    k_factor: np.ndarray
    l_matrix: np.ndarray

    @property
    def targets(self):
        """All class targets stacked as rows, shape ``(d, d-1)``."""
        centered = np.eye(self.d) - 1.0 / self.d
        return (self.l_matrix @ centered).T

    def target(self, k):
        return class_target(self, k)


def build_target_matrix(d, method="analytic"):
    """Build ``L = [K | 0]`` with ``K = (V sqrt(D))^T`` from ``gamma_inv = V D V^T``.

    ``method="analytic"`` uses the known spectrum (``d**2`` once, ``d`` on the
    complement) with a Helmert basis; ``method="jacobi"`` runs the iterative
    solver. Both sort eigenvalues descending with canonical eigenvector signs.
    """
    d = _check_classes(d)
    m = d - 1
    gamma_inv = build_gamma_inv(d)
    if method == "analytic":
        vals = np.full(m, float(d))
        vals[0] = float(d * d)
        vecs = helmert_basis(m)
    elif method == "jacobi":
        vals, vecs = jacobi_eigh(gamma_inv)
    else:
        raise ValueError(f"unknown eigendecomposition method {method!r}")
    k_factor = (vecs * np.sqrt(vals)).T
    l_matrix = np.hstack([k_factor, np.zeros((m, 1))])
    return TargetMatrix(d, build_gamma(d), gamma_inv, k_factor, l_matrix)


def class_target(tm, k):
    """Return ``t_k = L (e_k - 1/d)`` for class index ``k``."""
    if not 0 <= k < tm.d:
        raise IndexError(f"class index {k} out of range for d={tm.d}")
    centered = np.full(tm.d, -1.0 / tm.d)
    centered[k] += 1.0
    return tm.l_matrix @ centered
