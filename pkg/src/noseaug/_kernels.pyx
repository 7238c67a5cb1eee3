# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot loops: kNN-ratio nonconformity scoring and the linear-SVM
dual coordinate-descent solver.

Both functions have drop-in equivalents in ``_fallback.py``; the
nonconformity kernel is engineered to be bitwise-identical to the fallback
(ascending-order partial sums over the same multisets), so backend choice
never changes augmentation decisions.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()

cdef double INF = float("inf")


def knn_ratio_alphas(
    double[:, ::1] D,
    long long[::1] ref_labels,
    int n_classes,
    int k,
    long long[::1] exclude_cols,
):
    """Nonconformity scores from a precomputed distance block.

    For every row i of ``D`` (distances to the reference rows, one column per
    reference row) and every candidate class y, returns the ratio of the sum
    of the k smallest distances to reference rows of class y over the sum of
    the k smallest distances to reference rows of any other class.
    ``exclude_cols[i]`` names a column ignored for row i (-1 for none), which
    implements leave-one-out scoring of the reference against itself.

    Conventions: fewer than k same-class or other-class rows -> +inf;
    0/0 -> 0; finite/0 -> +inf. Sums accumulate in ascending distance order.
    """
    cdef Py_ssize_t n_rows = D.shape[0]
    cdef Py_ssize_t n_ref = D.shape[1]
    cdef Py_ssize_t i, j, c, y, m, pos, best_c, best_m
    cdef long long excl
    cdef double d, num, den, best, alpha
    cdef int cnt_y
    cdef cnp.ndarray[cnp.float64_t, ndim=2] out = np.empty(
        (n_rows, n_classes), dtype=np.float64
    )
    # Per-class buffers of the k smallest distances, ascending.
    cdef cnp.ndarray[cnp.float64_t, ndim=2] buf_arr = np.empty(
        (n_classes, k), dtype=np.float64
    )
    cdef double[:, ::1] buf = buf_arr
    cdef cnp.ndarray[cnp.int64_t, ndim=1] cnt_arr = np.empty(n_classes, dtype=np.int64)
    cdef long long[::1] cnt = cnt_arr
    # Merge cursors for the k-smallest-of-other-classes extraction.
    cdef cnp.ndarray[cnp.int64_t, ndim=1] cur_arr = np.empty(n_classes, dtype=np.int64)
    cdef long long[::1] cur = cur_arr

    if k <= 0:
        raise ValueError("k must be >= 1")

    for i in range(n_rows):
        excl = exclude_cols[i]
        for c in range(n_classes):
            cnt[c] = 0
            for m in range(k):
                buf[c, m] = INF
        for j in range(n_ref):
            if j == excl:
                continue
            c = ref_labels[j]
            d = D[i, j]
            if d < buf[c, k - 1]:
                pos = k - 1
                while pos > 0 and buf[c, pos - 1] > d:
                    buf[c, pos] = buf[c, pos - 1]
                    pos -= 1
                buf[c, pos] = d
            if cnt[c] < k:
                cnt[c] = cnt[c] + 1
        for y in range(n_classes):
            cnt_y = <int> cnt[y]
            if cnt_y < k:
                out[i, y] = INF
                continue
            num = 0.0
            for m in range(k):
                num += buf[y, m]
            # k smallest among all other classes, via k-way merge of the
            # per-class ascending buffers (each holds its class's k smallest,
            # so the union contains the global k smallest of the rest).
            den = 0.0
            alpha = -1.0
            for c in range(n_classes):
                cur[c] = 0
            for m in range(k):
                best = INF
                best_c = -1
                for c in range(n_classes):
                    if c == y or cur[c] >= cnt[c]:
                        continue
                    if buf[c, cur[c]] < best:
                        best = buf[c, cur[c]]
                        best_c = c
                if best_c < 0:
                    alpha = INF  # fewer than k other-class rows
                    break
                den += best
                cur[best_c] += 1
            if alpha < 0.0:
                if den == 0.0:
                    alpha = 0.0 if num == 0.0 else INF
                else:
                    alpha = num / den
            out[i, y] = alpha
    return out


def svm_dual_cd(
    double[:, ::1] X,
    double[::1] y,
    double C,
    double tol,
    int max_iter,
):
    """L2-loss (squared hinge) linear SVM via dual coordinate descent.

    Minimizes 0.5*||w||^2 + C * sum(max(0, 1 - y_i w.x_i)^2) through its
    dual, sweeping coordinates in a fixed cyclic order so the result is
    deterministic. ``y`` must be +/-1; a bias feature, if any, is expected as
    an extra column of ``X``. Returns (w, n_iter).
    """
    cdef Py_ssize_t n = X.shape[0]
    cdef Py_ssize_t d = X.shape[1]
    cdef Py_ssize_t i, j, it
    cdef double diag = 0.5 / C
    cdef double G, PG, alpha_old, alpha_new, delta, qii, yi, acc, max_pg
    cdef cnp.ndarray[cnp.float64_t, ndim=1] w_arr = np.zeros(d, dtype=np.float64)
    cdef double[::1] w = w_arr
    cdef cnp.ndarray[cnp.float64_t, ndim=1] alpha_arr = np.zeros(n, dtype=np.float64)
    cdef double[::1] alpha = alpha_arr
    cdef cnp.ndarray[cnp.float64_t, ndim=1] qd_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] qd = qd_arr

    for i in range(n):
        acc = 0.0
        for j in range(d):
            acc += X[i, j] * X[i, j]
        qd[i] = acc + diag

    it = 0
    while it < max_iter:
        max_pg = 0.0
        for i in range(n):
            yi = y[i]
            acc = 0.0
            for j in range(d):
                acc += w[j] * X[i, j]
            G = yi * acc - 1.0 + diag * alpha[i]
            if alpha[i] == 0.0:
                PG = G if G < 0.0 else 0.0
            else:
                PG = G
            if PG < 0.0:
                if -PG > max_pg:
                    max_pg = -PG
            elif PG > max_pg:
                max_pg = PG
            if PG != 0.0:
                alpha_old = alpha[i]
                alpha_new = alpha_old - G / qd[i]
                if alpha_new < 0.0:
                    alpha_new = 0.0
                if alpha_new != alpha_old:
                    delta = (alpha_new - alpha_old) * yi
                    alpha[i] = alpha_new
                    for j in range(d):
                        w[j] += delta * X[i, j]
        it += 1
        if max_pg < tol:
            break
    return w_arr, int(it)
