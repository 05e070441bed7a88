"""Benchmark the compiled stepping kernels against the NumPy fallback.

Run as ``python benchmarks/bench_kernels.py``. Prints per-step times for
the softmax-attention and zero-temperature updates over a grid of
ensemble sizes, plus the fused multi-step zero-temperature driver.

Expected picture: the zero-temperature path is loop-bound and the
compiled kernel wins several-fold; the softmax path is dominated by the
n-by-n BLAS products and SIMD exp, so both backends share that route and
differ only by the fused retraction pass.
"""

from __future__ import annotations

import time

import numpy as np

from spheredyn import _stepkernels_py as kernels_py
from spheredyn.geometry import RngStream

try:
    from spheredyn import _stepkernels as kernels_cy
except ImportError:
    kernels_cy = None


def _time(fn, *args, reps: int = 50) -> float:
    fn(*args)  # warm-up
    start = time.perf_counter()
    for _ in range(reps):
        fn(*args)
    return (time.perf_counter() - start) / reps * 1e3


def main() -> None:
    if kernels_cy is None:
        print("compiled extension not available; benchmarking NumPy backend only")
    rng = RngStream(987)
    cases = [(200, 3), (500, 3), (500, 10), (1000, 10), (2000, 3)]
    header = f"{'n':>6} {'d':>3} | {'softmax numpy':>14} {'softmax cython':>15} | {'zerotemp numpy':>15} {'zerotemp cython':>16} | {'zt-run(100) cython':>19}"
    print(header)
    print("-" * len(header))
    for n, d in cases:
        x = rng.generator.standard_normal((n, d))
        x = np.ascontiguousarray(x / np.linalg.norm(x, axis=1, keepdims=True))
        b = rng.generator.standard_normal((d, d))
        v = rng.generator.standard_normal((d, d))
        t_fb_py = _time(kernels_py.finite_beta_step, x, b, v, 30.0, 0.01)
        t_zt_py = _time(kernels_py.zero_temp_step, x, b, v, 0.01)
        if kernels_cy is not None:
            t_fb_cy = _time(kernels_cy.finite_beta_step, x, b, v, 30.0, 0.01)
            t_zt_cy = _time(kernels_cy.zero_temp_step, x, b, v, 0.01)
            t_run_cy = _time(kernels_cy.zero_temp_run, x, b, v, 0.01, 100, reps=10) / 100.0
            print(
                f"{n:>6} {d:>3} | {t_fb_py:>12.3f}ms {t_fb_cy:>13.3f}ms "
                f"| {t_zt_py:>13.4f}ms {t_zt_cy:>14.4f}ms | {t_run_cy:>17.4f}ms"
            )
        else:
            print(f"{n:>6} {d:>3} | {t_fb_py:>12.3f}ms {'-':>15} | {t_zt_py:>13.4f}ms {'-':>16} | {'-':>19}")


if __name__ == "__main__":
    main()
