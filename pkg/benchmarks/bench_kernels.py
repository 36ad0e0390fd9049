#!/usr/bin/env python3
"""Compare the compiled kernels against the pure-numpy fallback.

Times the three hot training loops on workloads shaped like the Monte Carlo
studies (many small cross-fitted fits, one large policy search) and checks
that both backends produce the same numbers.

Run: python benchmarks/bench_kernels.py
"""

import time

import numpy as np

from twohorizon._kernels import ref

try:
    from twohorizon._kernels import fast
except ImportError:
    fast = None


def timeit(fn, repeat=5):
    best = float("inf")
    for _ in range(repeat):
        start = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - start)
    return best, out


def flatten(outs):
    if isinstance(outs, tuple):
        return np.concatenate([np.atleast_1d(np.asarray(o, dtype=float)).ravel()
                               for o in outs])
    return np.asarray(outs, dtype=float).ravel()


def main():
    if fast is None:
        print("compiled kernels not available; nothing to compare")
        return

    rng = np.random.default_rng(0)
    cases = []

    # cross-fitting workload: small folds, many gradient steps
    x_small = rng.standard_normal((1600, 2))
    y_small = rng.integers(0, 2, 1600).astype(float)
    w0 = np.zeros(2)
    cases.append(("logistic_gd n=1600 p=2 iters=500",
                  lambda k: k.logistic_gd(x_small, y_small, 1e-3, 2.0, 500,
                                          w0, 0.0)))

    x_mlp = rng.standard_normal((500, 5))
    y_mlp = rng.standard_normal(500)
    w1 = rng.standard_normal((8, 5)) * 0.3
    b1 = np.zeros(8)
    w2 = rng.standard_normal(8) * 0.3
    cases.append(("mlp_gd n=500 p=5 h=8 iters=300",
                  lambda k: k.mlp_gd(x_mlp, y_mlp, w1, b1, w2, 0.0, 1e-3,
                                     0.1, 300, False)))

    # policy search workload: one large dataset, long Adam run
    xb = np.column_stack([np.ones(20_000), rng.standard_normal((20_000, 1))])
    slope = rng.standard_normal(20_000)
    theta0 = rng.uniform(-0.01, 0.01, 2)
    cases.append(("adam_max n=20000 iters=2000",
                  lambda k: k.adam_max(xb, slope, 0.05, 2000, 0.9, 0.999,
                                       1e-8, theta0)))

    print(f"{'kernel':<36}{'python':>12}{'compiled':>12}{'speedup':>10}{'max|diff|':>12}")
    for name, fn in cases:
        t_ref, out_ref = timeit(lambda: fn(ref))
        t_fast, out_fast = timeit(lambda: fn(fast))
        diff = float(np.max(np.abs(flatten(out_ref) - flatten(out_fast))))
        print(f"{name:<36}{t_ref * 1e3:>10.1f}ms{t_fast * 1e3:>10.1f}ms"
              f"{t_ref / t_fast:>9.1f}x{diff:>12.2e}")
        assert diff < 1e-8, f"{name}: backends disagree by {diff}"


if __name__ == "__main__":
    main()
