import numpy as np
import pytest

from fvib import _kernels_py, kernels

compiled = pytest.importorskip("fvib._kernels")


@pytest.mark.parametrize("n, k, d, s", [(1, 1, 2, 1), (7, 2, 3, 5), (30, 9, 10, 30)])
def test_compiled_matches_fallback(rng, n, k, d, s):
    mean = rng.standard_normal((n, k)) * 3
    std = rng.uniform(0, 2, (n, k))
    noise = rng.standard_normal((s, n, k))
    w = rng.standard_normal((d, k))
    y = rng.integers(0, d, n)
    for t in (1.0, 0.7):
        a = kernels.mc_softmax_mean(mean, std, noise, w, t, impl=compiled)
        b = kernels.mc_softmax_mean(mean, std, noise, w, t, impl=_kernels_py)
        np.testing.assert_allclose(a, b, rtol=0, atol=1e-12)
        a = kernels.mc_log_likelihood(mean, std, noise, w, y, t, impl=compiled)
        b = kernels.mc_log_likelihood(mean, std, noise, w, y, t, impl=_kernels_py)
        np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-12)


def test_scalar_std_broadcast_and_extreme_logits(rng):
    mean = np.array([[500.0, -500.0]])
    noise = rng.standard_normal((4, 1, 2))
    w = np.eye(2)
    p = kernels.mc_softmax_mean(mean, 0.1, noise, w)
    assert np.all(np.isfinite(p)) and p[0, 0] == pytest.approx(1.0)
    ll = kernels.mc_log_likelihood(mean, 0.1, noise, w, np.array([1]))
    assert ll[0] == pytest.approx(-1000.0, rel=1e-3)


def test_shape_checks(rng):
    with pytest.raises(ValueError):
        kernels.mc_softmax_mean(np.zeros((2, 3)), 1.0, np.zeros((4, 2, 2)), np.zeros((3, 3)))
    with pytest.raises(ValueError):
        kernels.mc_log_likelihood(np.zeros((2, 3)), 1.0, np.zeros((1, 2, 3)), np.zeros((3, 3)),
                                  np.zeros(3, dtype=int))


def test_backend_name():
    assert kernels.BACKEND in ("cython", "python")


def test_large_problems_route_to_numpy(monkeypatch):
    calls = []
    real = _kernels_py.mc_softmax_mean
    monkeypatch.setattr(_kernels_py, "mc_softmax_mean",
                        lambda *a: calls.append(1) or real(*a))
    k = 40
    kernels.mc_softmax_mean(np.zeros((2, k)), 1.0, np.zeros((1, 2, k)), np.zeros((41, k)))
    assert calls


def test_environment_forces_fallback():
    import os
    import subprocess
    import sys
    env = dict(os.environ, FVIB_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "from fvib import kernels; print(kernels.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
