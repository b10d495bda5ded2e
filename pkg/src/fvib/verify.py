"""Numeric self-checks of the closed-form results the package relies on.

Each check reports a measured error against its tolerance. Suites:

* simplex: factorization and regular-simplex geometry of the class targets
* stationarity: the closed-form optimum is a maximizer of the Taylor objective
* slope: the instantiated objective is affine in J with slope (1 - beta) / 2
* gap: distance to the optimum equals -(1 - beta) / 2 * J
* confidence: Taylor-optimal confidence and the CT temperature
* expectation: analytic Gaussian expectation vs Monte-Carlo
* gradients: dense net and reparameterized VIB loss vs finite differences
"""

import math
from dataclasses import dataclass

import numpy as np

from .baseline import make_encoder, vib_loss_and_grads
from .net import DenseNet
from .objectives import (Classifier, GaussianEncoding, expected_taylor, optimal_solution,
                         taylor_log_likelihood, taylor_vib_objective)
from .simplex import build_gamma_inv, build_target_matrix
from .trainer import ct_temperature, fvib_objective, instantiate, taylor_optimal_confidence


@dataclass
class Check:
    name: str
    measured: float
    tolerance: float
    passed: bool = None

    def __post_init__(self):
        if self.passed is None:
            self.passed = bool(self.measured <= self.tolerance)

    def line(self):
        status = "PASS" if self.passed else "FAIL"
        return f"{status}  {self.name}: measured {self.measured:.3e} (tol {self.tolerance:.1e})"


def simplex_checks(builder=build_target_matrix, dims=(2, 3, 5, 10, 100)):
    out = []
    for d in dims:
        tm = builder(d)
        t = tm.targets
        gram = t @ t.T
        out.append(Check(f"simplex d={d} K^T K = Gamma^-1",
                         float(np.abs(tm.k_factor.T @ tm.k_factor - build_gamma_inv(d)).max()),
                         1e-8))
        out.append(Check(f"simplex d={d} ||t_k||^2 = d-1",
                         float(np.abs(np.diag(gram) - (d - 1)).max()), 1e-8))
        off = gram[~np.eye(d, dtype=bool)]
        out.append(Check(f"simplex d={d} t_i.t_j = -1",
                         float(np.abs(off + 1).max()) if off.size else 0.0, 1e-8))
        out.append(Check(f"simplex d={d} sum t_k = 0", float(np.abs(t.sum(axis=0)).max()), 1e-10))
    return out


def _toy_labels(d=3, per_class=4):
    return np.repeat(np.arange(d), per_class)


def _flat_objective(y, beta, n, k, d):
    def f(theta):
        mu = theta[:n * k].reshape(n, k)
        var = theta[n * k:n * k + n]
        w = theta[n * k + n:].reshape(d, k)
        return taylor_vib_objective(GaussianEncoding(mu, var), y, Classifier(w), beta)
    return f


def stationarity_checks(betas=(0.1, 0.5, 0.9), step=1e-5, n_perturb=100, radius=1e-2, seed=0,
                        builder=build_target_matrix):
    out = []
    d = 3
    y = _toy_labels(d)
    tm = builder(d)
    rng = np.random.default_rng(seed)
    for beta in betas:
        enc, clf = optimal_solution(tm, y, beta)
        n, k = enc.mean.shape
        theta = np.concatenate([enc.mean.ravel(), enc.var, clf.weights.ravel()])
        f = _flat_objective(y, beta, n, k, d)
        grad = np.empty_like(theta)
        for i in range(theta.size):
            e = np.zeros_like(theta)
            e[i] = step
            grad[i] = (f(theta + e) - f(theta - e)) / (2 * step)
        out.append(Check(f"stationarity beta={beta} max |grad|", float(np.abs(grad).max()), 1e-4))
        base = f(theta)
        gains = []
        for _ in range(n_perturb):
            v = rng.standard_normal(theta.size)
            gains.append(f(theta + radius * v / np.linalg.norm(v)) - base)
        out.append(Check(f"stationarity beta={beta} max perturbation gain",
                         float(max(gains)), 1e-10))
    return out


def _random_outputs(seed, n, d):
    net = DenseNet([5, 16, d - 1], seed=seed)
    x = np.random.default_rng(seed + 100).standard_normal((n, 5))
    return net, net(x)


def slope_checks(betas=(0.0, 0.25, 0.5, 0.9), d=4, n=40):
    tm = build_target_matrix(d)
    y = np.arange(n) % d
    net1, h1 = _random_outputs(1, n, d)
    net2, h2 = _random_outputs(2, n, d)
    j1, j2 = fvib_objective(h1, y, tm), fvib_objective(h2, y, tm)
    out = []
    for beta in betas:
        v1 = instantiate(net1, tm, beta).taylor_objective(h=h1, y=y)
        v2 = instantiate(net2, tm, beta).taylor_objective(h=h2, y=y)
        slope = (v1 - v2) / (j1 - j2)
        expected = (1 - beta) / 2
        out.append(Check(f"slope beta={beta} measured {slope:.12f} vs (1-beta)/2={expected}",
                         abs(slope - expected) / expected, 1e-6))
    return out


def gap_checks(d=3, n=30, points=21):
    tm = build_target_matrix(d)
    y = np.arange(n) % d
    net, h = _random_outputs(3, n, d)
    j = fvib_objective(h, y, tm)
    worst, gaps = 0.0, []
    for beta in np.linspace(0.0, 1.0, points):
        enc, clf = optimal_solution(tm, y, beta)
        best = taylor_vib_objective(enc, y, clf, beta)
        inst = instantiate(net, tm, beta).taylor_objective(h=h, y=y)
        gaps.append(best - inst)
        worst = max(worst, abs((best - inst) - (-(1 - beta) / 2 * j)))
    return [Check(f"gap over {points} betas vs -(1-beta)/2 J", worst, 1e-6),
            Check("gap supremum at beta=0 equals -J/2", abs(max(gaps) + j / 2), 1e-6)]


def confidence_checks(dims=(2, 3, 5, 10)):
    out = []
    for d in dims:
        tm = build_target_matrix(d)
        w = tm.l_matrix.T
        p = np.eye(d) / d - np.ones((d, d)) / d**2
        g = np.eye(d)[0] - 1.0 / d
        # maximizer of the Taylor log-likelihood solves (W^T P W) z = W^T g
        z = np.linalg.solve(w.T @ p @ w, w.T @ g)
        logits = w @ z
        probs = np.exp(logits - logits.max())
        probs /= probs.sum()
        out.append(Check(f"confidence d={d} Taylor optimum vs e^d/(e^d+d-1)",
                         abs(probs[0] - taylor_optimal_confidence(d)), 1e-9))
        net = DenseNet([1, d - 1])
        model = instantiate(net, tm, 0.0, ct_enabled=True, c=0.997)
        conf = model.predict(h=tm.targets[:1])[0, 0]
        out.append(Check(f"confidence d={d} CT at beta=0 equals 0.997", abs(conf - 0.997), 1e-9))
    out.append(Check("CT temperature T(10, 0.997) vs 1.2495",
                     abs(ct_temperature(10, 0.997) - 1.2495), 1e-3))
    return out


def expectation_checks(configs=50, samples=100_000, seed=0):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(configs):
        d = int(rng.integers(2, 6))
        k = int(rng.integers(1, 5))
        clf = Classifier(rng.standard_normal((d, k)))
        mean = rng.standard_normal(k)
        var = rng.uniform(0.1, 2.0, size=k)
        y = int(rng.integers(d))
        z = mean + np.sqrt(var) * rng.standard_normal((samples, k))
        vals = taylor_log_likelihood(clf, z, np.full(samples, y))
        se = vals.std(ddof=1) / math.sqrt(samples)
        exact = float(expected_taylor(clf, GaussianEncoding(mean, var), y))
        worst = max(worst, abs(vals.mean() - exact) / se)
    return [Check(f"expectation analytic vs MC over {configs} configs (in standard errors)",
                  worst, 3.0)]


def _relative_fd_error(params, grads, loss, step=1e-5):
    worst = 0.0
    for p, g in zip(params, grads):
        for idx in np.ndindex(p.shape):
            old = p[idx]
            p[idx] = old + step
            up = loss()
            p[idx] = old - step
            down = loss()
            p[idx] = old
            fd = (up - down) / (2 * step)
            denom = max(abs(fd), abs(g[idx]), 1e-6)
            worst = max(worst, abs(fd - g[idx]) / denom)
    return worst


def gradient_checks(seed=0):
    rng = np.random.default_rng(seed)
    net = DenseNet([4, 6, 5, 3], seed=seed)
    for b in net.biases:
        b += 0.1 * rng.standard_normal(b.shape)
    x = rng.standard_normal((7, 4))
    target = rng.standard_normal((7, 3))

    def mse():
        return float(np.sum((net.forward(x) - target) ** 2))

    net.forward(x)
    grads = net.backward(2 * (net.forward(x) - target))
    dense = _relative_fd_error(net.params(), grads, mse)

    enc = make_encoder(4, 3, 0.3, kappa=2, hidden=(6,), seed=seed)
    enc.net.weights[-1][:, 2:] = 0.3 * rng.standard_normal((6, 2))
    y = rng.integers(0, 3, 7)
    eps = rng.standard_normal((7, 2))
    _, vgrads = vib_loss_and_grads(enc, x, y, 0.3, eps)
    vib = _relative_fd_error(enc.params(), vgrads,
                             lambda: vib_loss_and_grads(enc, x, y, 0.3, eps)[0])
    return [Check("gradient dense net vs finite differences (relative)", dense, 1e-4),
            Check("gradient reparameterized VIB loss vs finite differences (relative)", vib, 1e-4)]


SUITES = {
    "simplex": simplex_checks,
    "stationarity": stationarity_checks,
    "slope": slope_checks,
    "gap": gap_checks,
    "confidence": confidence_checks,
    "expectation": expectation_checks,
    "gradients": gradient_checks,
}


def run(suites=None, builder=build_target_matrix):
    """Run the named suites (all by default); ``builder`` swaps the target-matrix constructor."""
    checks = []
    for name in suites or SUITES:
        fn = SUITES[name]
        if name in ("simplex", "stationarity"):
            checks.extend(fn(builder=builder))
        else:
            checks.extend(fn())
    return checks
