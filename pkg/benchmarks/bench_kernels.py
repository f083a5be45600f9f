"""Time the compiled and pure-Python kernels on identical inputs.

Usage::

    python3 benchmarks/bench_kernels.py [--repeat 5] [--K 4] [--M 4]

Prints a table of median wall-clock times per call and the speed-up of the
compiled backend. Without the compiled extension only the Python column is
filled.
"""

import argparse
import timeit

import numpy as np

from mimobc.kernels import available_backends
from mimobc.matkernel import child_rng, sample_complex_gaussian


def cases(K: int, M: int, P: float):
    rng = child_rng(2024)
    h = sample_complex_gaussian(rng, K, M)
    w = np.sort(rng.dirichlet(np.ones(K)))[::-1]
    coef = w - np.append(w[1:], 0.0)
    p = rng.uniform(0, P / K, K)
    g = rng.exponential(size=64)
    H = sample_complex_gaussian(rng, K, max(M, K))
    return {
        "mac_eval": lambda be: be.mac_eval(h, p, coef),
        "weighted_mac_solve": lambda be: be.weighted_mac_solve(h, coef, P),
        "waterfill(64)": lambda be: be.waterfill(g, P),
        "successive_norms": lambda be: be.successive_norms(H),
    }


def bench(fn, repeat: int) -> float:
    t = timeit.Timer(fn)
    n, _ = t.autorange()
    return float(np.median(t.repeat(repeat, n))) / n


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--K", type=int, default=4)
    ap.add_argument("--M", type=int, default=4)
    ap.add_argument("--P", type=float, default=100.0)
    args = ap.parse_args(argv)

    backends = available_backends()
    print(f"backends: {', '.join(sorted(backends))}; K={args.K}, M={args.M}, P={args.P}")
    print(f"{'kernel':<20s} {'python (us)':>12s} {'cython (us)':>12s} {'speed-up':>9s}")
    for name, call in cases(args.K, args.M, args.P).items():
        t = {b: bench(lambda be=be: call(be), args.repeat) * 1e6 for b, be in backends.items()}
        py, cy = t.get("python"), t.get("cython")
        cy_s = f"{cy:12.1f}" if cy is not None else f"{'n/a':>12s}"
        sp = f"{py / cy:8.1f}x" if cy else f"{'':>9s}"
        print(f"{name:<20s} {py:12.1f} {cy_s} {sp}")


if __name__ == "__main__":
    main()
