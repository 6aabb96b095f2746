#!/usr/bin/env python3
"""Benchmark the compiled kernels against the numpy fallback.

The kernels cover the pointwise/reduction hot path: Hamiltonian powers
evaluated every relaxation step, the Newton linearization scale, norm and
measure reductions, and the superlevel functional swept over a k-grid.
Run after `pip install -e . --no-build-isolation`:

    python benchmarks/bench_kernels.py [--nodes 262144] [--repeats 5]
"""

import argparse
import time

import numpy as np

from hjlab import _kernels_py

try:
    from hjlab import _kernels
except ImportError:
    _kernels = None


def _time(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--nodes", type=int, default=64**3, help="array length (default 64^3)")
    ap.add_argument("--repeats", type=int, default=5)
    args = ap.parse_args()

    rng = np.random.default_rng(0)
    x = np.abs(rng.standard_normal(args.nodes)) + 0.01
    p = np.ascontiguousarray(rng.standard_normal((3, args.nodes)))
    s = np.ascontiguousarray(_kernels_py.grad_norm_sq(p))
    kgrid = 1.0 * (float((1.0 + s.max()) ** 0.53) / 1.0) ** np.linspace(0.0, 1.0, 64)

    cases = [
        ("abs_pow_sum(q=2.5)", lambda k: k.abs_pow_sum(x, 2.5)),
        ("count_above", lambda k: k.count_above(x, 1.0)),
        ("grad_norm_sq(d=3)", lambda k: k.grad_norm_sq(p)),
        ("ham_power(gamma=3)", lambda k: k.ham_power(s, 3.0, 1.0)),
        ("dh_scale(gamma=3)", lambda k: k.dh_scale(s, 3.0, 1.0)),
        ("yk_curve(64 levels)", lambda k: k.yk_curve(s, kgrid, 0.0417, 11.52)),
    ]

    print(f"nodes = {args.nodes}, repeats = {args.repeats} (best of)")
    header = f"{'kernel':<22} {'numpy [ms]':>12} {'compiled [ms]':>14} {'speedup':>9}"
    print(header)
    print("-" * len(header))
    for name, call in cases:
        t_py = _time(lambda: call(_kernels_py), args.repeats) * 1e3
        if _kernels is None:
            print(f"{name:<22} {t_py:>12.3f} {'n/a':>14} {'n/a':>9}")
            continue
        t_c = _time(lambda: call(_kernels), args.repeats) * 1e3
        print(f"{name:<22} {t_py:>12.3f} {t_c:>14.3f} {t_py / t_c:>8.1f}x")
    if _kernels is None:
        print("\ncompiled extension not available; showing fallback only")


if __name__ == "__main__":
    main()
