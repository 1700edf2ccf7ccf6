"""Time the compiled kernel core against the NumPy fallback.

    python3 benchmarks/bench_core.py [--repeat 5]

Both backends are called directly, so the selection done by ``noisybq._backend``
does not matter here.  Outputs are also cross-checked before timing.
"""

import argparse
import timeit

import numpy as np

from noisybq import _kernels_py

try:
    from noisybq import _kernels_ext
except ImportError:  # extension not built
    _kernels_ext = None

CASES = [
    # (label, nu, n_a, n_b, d)
    ("cross  nu=1.5  250 x 2048, d=1", 1.5, 250, 2048, 1),
    ("cross  nu=2.5  250 x 4096, d=2", 2.5, 250, 4096, 2),
    ("cross  nu=1.0  100 x 2048, d=1", 1.0, 100, 2048, 1),
    ("expand nu=1.5  250 -> 131072, d=2", 1.5, 250, 131072, 2),
    ("expand nu=0.7  60 -> 20000, d=1", 0.7, 60, 20000, 1),
]


def run_case(core, nu, a, b, w, label):
    if label.startswith("cross"):
        return lambda: core.matern_cross(nu, 0.1, 1.0, a, b)
    return lambda: core.matern_expansion(nu, 0.1, 1.0, a, w, b)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if _kernels_ext is None:
        print("compiled core not built; run `python3 setup.py build_ext --inplace` first")
        return
    rng = np.random.default_rng(0)
    print(f"{'case':<36} {'numpy [ms]':>11} {'cython [ms]':>12} {'speedup':>8}")
    for label, nu, na, nb, d in CASES:
        a, b, w = rng.random((na, d)), rng.random((nb, d)), rng.normal(size=na)
        ref = run_case(_kernels_py, nu, a, b, w, label)()
        got = run_case(_kernels_ext, nu, a, b, w, label)()
        np.testing.assert_allclose(got, ref, rtol=1e-10, atol=1e-12)
        times = []
        for core in (_kernels_py, _kernels_ext):
            fn = run_case(core, nu, a, b, w, label)
            times.append(min(timeit.repeat(fn, number=1, repeat=args.repeat)) * 1e3)
        print(f"{label:<36} {times[0]:>11.2f} {times[1]:>12.2f} {times[0] / times[1]:>7.1f}x")


if __name__ == "__main__":
    main()
