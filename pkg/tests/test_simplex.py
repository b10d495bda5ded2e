import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fvib.errors import DomainError, NumericError
from fvib.simplex import (build_gamma, build_gamma_inv, build_target_matrix, class_target,
                          helmert_basis, jacobi_eigh)


def test_gamma_inverse_pair(target_matrix):
    d = target_matrix.d
    np.testing.assert_allclose(build_gamma(d) @ build_gamma_inv(d), np.eye(d - 1), atol=1e-12)


def test_gamma_inv_entries():
    g = build_gamma_inv(4)
    assert np.all(np.diag(g) == 8.0)
    assert g[0, 1] == 4.0 and g.shape == (3, 3)


def test_factor_reproduces_gamma_inv(target_matrix):
    k = target_matrix.k_factor
    np.testing.assert_allclose(k.T @ k, build_gamma_inv(target_matrix.d), atol=1e-10)


def test_l_matrix_has_zero_last_column(target_matrix):
    d = target_matrix.d
    assert target_matrix.l_matrix.shape == (d - 1, d)
    assert np.all(target_matrix.l_matrix[:, -1] == 0.0)


def test_two_class_targets_are_plus_minus_one():
    tm = build_target_matrix(2)
    np.testing.assert_allclose(tm.targets[:, 0], [1.0, -1.0], atol=1e-15)


def test_three_class_target_zero_frozen():
    # hand-derived: K rows (3/sqrt2, 3/sqrt2) and (sqrt(3/2), -sqrt(3/2))
    t0 = build_target_matrix(3).target(0)
    np.testing.assert_allclose(t0, [1 / math.sqrt(2), math.sqrt(1.5)], atol=1e-14)


def test_helmert_basis_orthonormal():
    b = helmert_basis(6)
    np.testing.assert_allclose(b.T @ b, np.eye(6), atol=1e-14)
    np.testing.assert_allclose(b[:, 0], 1 / math.sqrt(6))


@pytest.mark.parametrize("d", [2, 3, 7, 20])
def test_jacobi_matches_analytic(d):
    # the d-eigenspace is degenerate, so compare invariants rather than K itself
    a = build_target_matrix(d, method="analytic")
    j = build_target_matrix(d, method="jacobi")
    np.testing.assert_allclose(j.k_factor.T @ j.k_factor, a.k_factor.T @ a.k_factor, atol=1e-9)
    np.testing.assert_allclose(j.targets @ j.targets.T, a.targets @ a.targets.T, atol=1e-9)


def test_jacobi_against_numpy_spectrum(rng):
    m = rng.standard_normal((8, 8))
    s = m + m.T
    vals, vecs = jacobi_eigh(s)
    np.testing.assert_allclose(vals, np.sort(np.linalg.eigvalsh(s))[::-1], atol=1e-10)
    np.testing.assert_allclose(s @ vecs, vecs * vals, atol=1e-10)
    assert np.all(np.diff(vals) <= 0)


def test_jacobi_reports_iterations_on_failure():
    m = np.array([[1.0, 2.0, 0.5], [2.0, -1.0, 0.3], [0.5, 0.3, 0.2]])
    with pytest.raises(NumericError, match="after 0 iterations"):
        jacobi_eigh(m, max_sweeps=0)


@pytest.mark.parametrize("bad", [1, 0, -3, 2.5])
def test_invalid_class_count(bad):
    with pytest.raises(DomainError):
        build_target_matrix(bad)


def test_class_target_index_range():
    tm = build_target_matrix(4)
    with pytest.raises(IndexError):
        class_target(tm, 4)
    np.testing.assert_allclose(class_target(tm, 1), tm.targets[1], atol=1e-14)


def test_deterministic_construction():
    a, b = build_target_matrix(9), build_target_matrix(9)
    assert np.array_equal(a.l_matrix, b.l_matrix)


@settings(max_examples=40, deadline=None)
@given(st.integers(min_value=2, max_value=60))
def test_targets_form_regular_simplex(d):
    t = build_target_matrix(d).targets
    gram = t @ t.T
    expected = -np.ones((d, d)) + d * np.eye(d)
    np.testing.assert_allclose(gram, expected, atol=1e-9)
    np.testing.assert_allclose(t.sum(axis=0), 0.0, atol=1e-10)
