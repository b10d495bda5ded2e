"""Expected calibration error, temperature scaling, and post-hoc optimization of beta."""

import csv
import io
import json
import math
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import DataError, EmptyInputError
from .objectives import log_softmax

DEFAULT_BINS = 15
BETA_UPPER = 1.0 - 1e-6
PROB_FLOOR = 1e-300


@dataclass
class BinStat:
    low: float
    high: float
    count: int
    confidence: float
    accuracy: float


@dataclass
class CalibrationReport:
    ece: float
    nll: float
    accuracy: float
    bin_stats: list
    method: str = ""
    beta: float = None
    temperature: float = None
    extra: dict = field(default_factory=dict)

    def to_dict(self):
        return asdict(self)

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def bins_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["bin_low", "bin_high", "count", "confidence", "accuracy"])
        for b in self.bin_stats:
            w.writerow([repr(b.low), repr(b.high), b.count, repr(b.confidence), repr(b.accuracy)])
        return buf.getvalue()


def _check_probs(probs, labels):
    probs = np.asarray(probs, dtype=np.float64)
    labels = np.asarray(labels)
    if probs.ndim != 2 or labels.shape != (probs.shape[0],):
        raise DataError(f"probabilities {probs.shape} and labels {labels.shape} disagree")
    if probs.shape[0] == 0:
        raise EmptyInputError("no predictions")
    if np.any(probs < 0) or np.any(probs > 1) or not np.all(np.isfinite(probs)):
        raise DataError("probabilities must lie in [0, 1]")
    if np.max(np.abs(probs.sum(axis=1) - 1.0)) > 1e-6:
        raise DataError("probability rows must sum to 1")
    if labels.min() < 0 or labels.max() >= probs.shape[1]:
        raise DataError("label out of range")
    return probs, labels.astype(np.int64)


def bin_statistics(probs, labels, bins=DEFAULT_BINS):
    """Equal-width bins over the top-class confidence, right-closed: ``(lo, hi]``."""
    if bins < 1:
        raise DataError(f"need at least one bin, got {bins}")
    probs, labels = _check_probs(probs, labels)
    conf = probs.max(axis=1)
    correct = (probs.argmax(axis=1) == labels).astype(np.float64)
    idx = np.clip(np.ceil(conf * bins).astype(np.int64) - 1, 0, bins - 1)
    counts = np.bincount(idx, minlength=bins)
    conf_sum = np.bincount(idx, weights=conf, minlength=bins)
    acc_sum = np.bincount(idx, weights=correct, minlength=bins)
    stats = []
    for b in range(bins):
        n = int(counts[b])
        stats.append(BinStat(b / bins, (b + 1) / bins, n,
                             float(conf_sum[b] / n) if n else 0.0,
                             float(acc_sum[b] / n) if n else 0.0))
    return stats


def ece_from_bins(stats, n):
    return float(sum(b.count / n * abs(b.accuracy - b.confidence) for b in stats))


def ece(probs, labels, bins=DEFAULT_BINS):
    """Expected calibration error with ``bins`` equal-width confidence bins."""
    stats = bin_statistics(probs, labels, bins)
    return ece_from_bins(stats, len(labels))


def nll(probs, labels):
    probs = np.asarray(probs)
    picked = probs[np.arange(len(labels)), np.asarray(labels)]
    return float(-np.mean(np.log(np.maximum(picked, PROB_FLOOR))))


def accuracy(probs, labels):
    return float(np.mean(np.asarray(probs).argmax(axis=1) == np.asarray(labels)))


def report(probs, labels, bins=DEFAULT_BINS, method="", beta=None, temperature=None, **extra):
    stats = bin_statistics(probs, labels, bins)
    return CalibrationReport(ece_from_bins(stats, len(labels)), nll(probs, labels),
                             accuracy(probs, labels), stats, method, beta, temperature, extra)


def _temperature_nll(scores, labels, inv_temp):
    logp = log_softmax(scores * inv_temp)
    return -float(np.mean(logp[np.arange(len(labels)), labels]))


def optimize_temperature(scores, labels, tol=1e-8, max_iter=100):
    """Temperature ``T > 0`` minimizing the mean NLL of ``softmax(scores / T)``.

    The NLL is convex in the inverse temperature ``a = 1/T``; a safeguarded
    Newton iteration on ``a`` stops once ``|dNLL/da| <= tol``. Degenerate
    score matrices (every row identical, or every row constant) return 1.
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if scores.ndim != 2 or scores.shape[0] == 0 or labels.shape != (scores.shape[0],):
        raise EmptyInputError("temperature scaling needs a nonempty (N, d) score matrix")
    rows_constant = np.all(scores == scores[:, :1])
    rows_identical = np.all(scores == scores[:1])
    if rows_constant or rows_identical:
        warnings.warn("degenerate scores for temperature scaling; returning T=1", stacklevel=2)
        return 1.0
    picked = scores[np.arange(len(labels)), labels]
    a = 1.0
    for _ in range(max_iter):
        p = np.exp(log_softmax(scores * a))
        mean_s = (p * scores).sum(axis=1)
        grad = float(np.mean(mean_s - picked))
        if abs(grad) <= tol:
            break
        hess = float(np.mean((p * scores**2).sum(axis=1) - mean_s**2))
        step = grad / hess if hess > 0 else math.copysign(a, grad)
        f0 = _temperature_nll(scores, labels, a)
        new = a - step
        while new <= 0 or _temperature_nll(scores, labels, new) > f0 + 1e-15:
            step *= 0.5
            new = a - step
            if abs(step) < 1e-16 * max(a, 1.0):
                new = a
                break
        if new == a:
            break
        a = new
    return 1.0 / a


PHI = (math.sqrt(5.0) - 1.0) / 2.0


def golden_section(f, lo, hi, tol=1e-5, max_iter=200):
    """Minimize a unimodal ``f`` on ``[lo, hi]``; returns ``(x, f(x))``.

    The endpoints are evaluated too and win if they beat the interior point.
    """
    f_lo, f_hi = f(lo), f(hi)
    a, b = lo, hi
    x1 = b - PHI * (b - a)
    x2 = a + PHI * (b - a)
    f1, f2 = f(x1), f(x2)
    for _ in range(max_iter):
        if b - a <= tol:
            break
        if f1 <= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - PHI * (b - a)
            f1 = f(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + PHI * (b - a)
            f2 = f(x2)
    best = min([(f1, x1), (f2, x2), (f_lo, lo), (f_hi, hi)], key=lambda t: (t[0], t[1]))
    return best[1], best[0]


def beta_nll_curve(model, h, labels, noise):
    """``beta -> mean NLL`` of the instantiated model with fixed noise draws."""
    labels = np.asarray(labels)

    def f(beta):
        probs = model.at(beta).predict(h=h, noise=noise, samples=noise.shape[0])
        return nll(probs, labels)

    return f


def optimize_beta(model, x_val, y_val, samples=30, seed=0, grid_points=41, tol=1e-5,
                  bins=DEFAULT_BINS):
    """Continuous post-hoc choice of beta minimizing validation NLL.

    ``model`` is any trained FVIB model (``at(beta)`` gives the instantiation).
    The Gaussian draws are fixed once from ``seed`` so the NLL is a
    deterministic function of beta; a coarse grid on ``[0, 1 - 1e-6]``
    brackets the minimum, which golden-section search then refines.
    Returns ``(beta, report)`` with the report evaluated on the validation set.
    """
    y_val = np.asarray(y_val)
    if len(y_val) == 0:
        raise EmptyInputError("empty validation set")
    h = model.net(x_val)
    noise = model.noise(len(y_val), samples, seed)
    f = beta_nll_curve(model, h, y_val, noise)
    grid = np.linspace(0.0, BETA_UPPER, grid_points)
    values = np.array([f(b) for b in grid])
    i = int(np.argmin(values))
    lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, grid_points - 1)]
    beta, best = golden_section(f, lo, hi, tol)
    if values[i] < best:
        beta, best = float(grid[i]), float(values[i])
    probs = model.at(beta).predict(h=h, noise=noise, samples=samples)
    rep = report(probs, y_val, bins, method="fvib-continuous", beta=float(beta))
    rep.extra["search"] = {"grid_points": grid_points, "tol": tol, "val_nll": best}
    return float(beta), rep
