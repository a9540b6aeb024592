"""Time the numba kernels against their numpy twins.

    python3 benchmarks/bench_kernels.py [repeats]
"""
import sys
import time

import numpy as np

from bhwave import _kernels as K


def best(fn, *args, repeats=5):
    fn(*args)   # warm up (triggers numba compilation)
    times = []
    for _ in range(repeats):
        t = time.perf_counter()
        fn(*args)
        times.append(time.perf_counter() - t)
    return min(times)


def cases():
    rng = np.random.default_rng(0)
    half = rng.standard_normal(64) + 1j * rng.standard_normal(64)
    uhat = np.concatenate([np.conj(half[::-1]), [0.0], half])
    modes = np.concatenate([np.arange(-256, 0), np.arange(1, 257)])
    lam = 1j * np.arange(-32, 33, dtype=float)
    return [
        ("taylor_recurrence(120)", "taylor_recurrence", (120,)),
        ("diagonal_recurrence(200)", "diagonal_recurrence", (200,)),
        ("e_partial(4, 10**6)", "e_partial", (4, 10 ** 6)),
        ("assemble_L(N=256)", "assemble_L", (modes, uhat, -1.0)),
        ("triple_min(65)", "triple_min", (lam,)),
    ]


def main(repeats=5):
    print(f"{'kernel':28s} {'numba [ms]':>12s} {'numpy [ms]':>12s} {'ratio':>8s}")
    for label, name, args in cases():
        tn = best(getattr(K, name + "_loop"), *args, repeats=repeats)
        tp = best(getattr(K, name + "_numpy"), *args, repeats=repeats)
        print(f"{label:28s} {1e3 * tn:12.3f} {1e3 * tp:12.3f} {tp / tn:8.1f}")


if __name__ == "__main__":
    main(int(sys.argv[1]) if len(sys.argv) > 1 else 5)
