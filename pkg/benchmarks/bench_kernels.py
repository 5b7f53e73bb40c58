"""Compare the compiled and numpy kernel backends.

    python3 benchmarks/bench_kernels.py [--repeat 5]

Prints the best time per call for each kernel and backend, their ratio, and
the largest difference between the two results.
"""
import argparse
import timeit

import numpy as np

from convlab import _backend


def cases(rng):
    n = 128
    h = 8.0 / n
    nodes = 400
    X = rng.uniform(0, 8, nodes)
    Y = rng.uniform(0, 8, nodes)
    fx, fy = rng.standard_normal(nodes), rng.standard_normal(nodes)
    w = np.full(nodes, h / 2)
    u, v = rng.standard_normal((n, n)), rng.standard_normal((n, n))
    P = np.column_stack([X, Y])
    m = np.arange(nodes - 1, dtype=np.int64)
    s = m + 1
    k = np.full(nodes - 1, 1e3)
    rest = np.full(nodes - 1, 0.01)
    vals = rng.standard_normal(1 << 20)

    def springs(kern):
        out = np.zeros((nodes, 2))
        kern.spring_accumulate(P, m, s, k, rest, False, out)
        return out

    return {
        "delta_phi[1e5]": lambda kern: kern.delta_phi(np.linspace(-2.5, 2.5, 100_000)),
        "spread[400 nodes, 128^2]": lambda kern: kern.spread(X, Y, fx, fy, w, n, h),
        "interp[400 nodes, 128^2]": lambda kern: kern.interp(u, v, X, Y, h),
        "advect_skew[128^2]": lambda kern: kern.advect_skew(u, v, h),
        "neumaier_sum[2^20]": lambda kern: sum(kern.neumaier_sum(vals)),
        "spring_accumulate[399]": springs,
    }


def _diff(a, b):
    a = a if isinstance(a, tuple) else (a,)
    b = b if isinstance(b, tuple) else (b,)
    return max(float(np.max(np.abs(np.asarray(x) - np.asarray(y)))) for x, y in zip(a, b))


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    names = sorted(_backend.BACKENDS)
    if "compiled" not in names:
        print("compiled backend not built; only the numpy kernels are available")
    rng = np.random.default_rng(7)
    print(f"{'kernel':28s}" + "".join(f"{b:>14s}" for b in names) + f"{'speedup':>10s}{'max|diff|':>12s}")
    for label, fn in cases(rng).items():
        best, results = {}, {}
        for b in names:
            kern = _backend.get(b)
            results[b] = fn(kern)
            t = timeit.Timer(lambda: fn(kern))
            reps, _ = t.autorange()
            best[b] = min(t.repeat(args.repeat, reps)) / reps
        row = f"{label:28s}" + "".join(f"{best[b] * 1e3:12.3f}ms" for b in names)
        if len(names) == 2:
            row += f"{best['python'] / best['compiled']:9.1f}x"
            row += f"{_diff(results['python'], results['compiled']):12.2e}"
        print(row)


if __name__ == "__main__":
    main()
