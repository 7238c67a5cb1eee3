#!/usr/bin/env python3
"""Benchmark the compiled kernels against the pure-NumPy fallback.

Times the two hot paths behind the conformal scorer and the linear SVM on
workload shapes matching a typical benchmark task, checks that both
implementations agree, and prints the median per-call time of each backend.

    python3 benchmarks/bench_kernels.py [--repeats 7]
"""

import argparse
import time

import numpy as np

from noseaug import _fallback
from noseaug._backend import COMPILED
from noseaug._distances import pairwise_distances

if COMPILED:
    from noseaug import _kernels


def median_time(fn, repeats):
    times = []
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        times.append(time.perf_counter() - start)
    return float(np.median(times))


def alpha_workload(rng):
    """Score 480 rows against a 360-row reference, six classes, k=3."""
    reference = rng.normal(size=(360, 32))
    rows = rng.normal(size=(480, 32))
    labels = rng.integers(0, 6, 360).astype(np.int64)
    D = pairwise_distances(rows, reference)
    exclude = np.full(480, -1, dtype=np.int64)
    return (D, labels, 6, 3, exclude)


def svm_workload(rng):
    """One one-vs-rest subproblem: 360 rows, 33 columns with bias."""
    X = np.ascontiguousarray(rng.normal(size=(360, 33)))
    y = np.where(rng.integers(0, 2, 360) == 0, -1.0, 1.0)
    return (X, y, 1.0, 1e-3, 1000)


def check_agreement(args_alpha, args_svm):
    a_py = _fallback.knn_ratio_alphas(*args_alpha)
    a_c = _kernels.knn_ratio_alphas(*args_alpha)
    if not np.array_equal(a_py, a_c):
        raise AssertionError("alpha kernels disagree")
    w_py, _ = _fallback.svm_dual_cd(*args_svm)
    w_c, _ = _kernels.svm_dual_cd(*args_svm)
    if not np.allclose(w_py, w_c, atol=1e-10):
        raise AssertionError("svm kernels disagree")


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument(
        "--repeats", type=int, default=7, help="timing repeats per kernel"
    )
    args = parser.parse_args()
    if not COMPILED:
        print("compiled extension not available; nothing to compare")
        return

    rng = np.random.default_rng(0)
    args_alpha = alpha_workload(rng)
    args_svm = svm_workload(rng)
    check_agreement(args_alpha, args_svm)

    rows = [
        (
            "knn_ratio_alphas",
            median_time(lambda: _kernels.knn_ratio_alphas(*args_alpha), args.repeats),
            median_time(lambda: _fallback.knn_ratio_alphas(*args_alpha), args.repeats),
        ),
        (
            "svm_dual_cd",
            median_time(lambda: _kernels.svm_dual_cd(*args_svm), args.repeats),
            median_time(lambda: _fallback.svm_dual_cd(*args_svm), args.repeats),
        ),
    ]
    print(f"{'kernel':<18} {'compiled':>10} {'python':>10} {'speedup':>8}")
    for name, t_c, t_py in rows:
        print(f"{name:<18} {t_c * 1e3:>8.2f}ms {t_py * 1e3:>8.2f}ms {t_py / t_c:>7.1f}x")


if __name__ == "__main__":
    main()
