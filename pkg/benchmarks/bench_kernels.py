"""Compare the compiled Monte-Carlo kernels with the numpy fallback.

``auto`` is what callers get by default (size-based dispatch in ``fvib.kernels``).

    python benchmarks/bench_kernels.py [--repeat 5]
"""

import argparse
import timeit

import numpy as np

from fvib import _kernels_py, kernels

try:
    from fvib import _kernels as compiled
except ImportError:
    compiled = None

# (N, latent dim, classes, samples): MNIST-like validation set, a larger d, a tiny batch
SHAPES = [(10_000, 9, 10, 30), (2_000, 99, 100, 30), (64, 2, 3, 30)]


def bench(impl, fn, args, repeat):
    call = lambda: getattr(kernels, fn)(*args, impl=impl)
    return min(timeit.repeat(call, number=1, repeat=repeat))


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if compiled is None:
        print("compiled extension not built; run `pip install -e .` first")
        return
    rng = np.random.default_rng(0)
    print(f"{'kernel':<18}{'N':>7}{'k':>5}{'d':>5}{'S':>4}{'python ms':>12}{'cython ms':>12}{'speedup':>9}{'auto ms':>10}")
    for n, k, d, s in SHAPES:
        mean = rng.standard_normal((n, k))
        noise = rng.standard_normal((s, n, k))
        w = rng.standard_normal((d, k))
        y = rng.integers(0, d, n)
        cases = {"mc_softmax_mean": (mean, 0.5, noise, w, 1.25),
                 "mc_log_likelihood": (mean, 0.5, noise, w, y, 1.25)}
        for fn, fargs in cases.items():
            py = bench(_kernels_py, fn, fargs, args.repeat)
            cy = bench(compiled, fn, fargs, args.repeat)
            auto = bench(None, fn, fargs, args.repeat)
            print(f"{fn:<18}{n:>7}{k:>5}{d:>5}{s:>4}{py * 1e3:>12.2f}{cy * 1e3:>12.2f}"
                  f"{py / cy:>8.1f}x{auto * 1e3:>10.2f}")


if __name__ == "__main__":
    main()
