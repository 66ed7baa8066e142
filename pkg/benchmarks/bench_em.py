"""Timing comparison of the jitted EM kernels against the numpy fallback.

Run:  python3 benchmarks/bench_em.py [--repeats N]

The jitted path is what the package uses when numba imports cleanly;
the numpy implementations are the REACTMAP_NO_NUMBA fallback. Both are
timed on the same inputs, so the table shows exactly what the env flag
costs (or saves) at each problem size.
"""

import argparse
import time

import numpy as np

from reactmap import _kernels

SIZES = [
    ("suite image (28x28, d=16)", 784, 16),
    ("backbone map (14x14, d=512)", 196, 512),
    ("large map (56x56, d=256)", 3136, 256),
]


def _time(fn, args, repeats):
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - start)
    return best


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--repeats", type=int, default=20)
    args = parser.parse_args()

    if not _kernels.NUMBA_ENABLED:
        print("jit path unavailable (REACTMAP_NO_NUMBA set or numba missing);")
        print("only the numpy fallback can be timed in this process.")
    _kernels.warmup()

    rng = np.random.default_rng(0)
    header = f"{'case':<30} {'kernel':<16} {'jit':>10} {'numpy':>10} {'speedup':>8}"
    print(header)
    print("-" * len(header))
    for name, n, d in SIZES:
        X = rng.standard_normal((n, d))
        v_fg = rng.standard_normal(d)
        v_bg = rng.standard_normal(d)
        z = rng.random(n)
        cases = [
            ("e_step", _kernels.e_step_core, _kernels._e_step_np,
             (X, v_fg, v_bg, np.log(0.5), np.log(0.5), 8.0)),
            ("log_likelihood", _kernels.log_likelihood_core, _kernels._log_likelihood_np,
             (X, v_fg, v_bg, np.log(0.5), np.log(0.5), 8.0)),
            ("m_step", _kernels.m_step_core, _kernels._m_step_np, (X, z)),
        ]
        for kernel, active, fallback, call_args in cases:
            t_active = _time(active, call_args, args.repeats)
            t_np = _time(fallback, call_args, args.repeats)
            ratio = t_np / t_active if t_active > 0 else float("inf")
            print(
                f"{name:<30} {kernel:<16} {t_active * 1e6:>8.1f}us {t_np * 1e6:>8.1f}us"
                f" {ratio:>7.2f}x"
            )


if __name__ == "__main__":
    main()
