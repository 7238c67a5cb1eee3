"""Pure-Python/NumPy equivalents of the compiled kernels.

``knn_ratio_alphas`` here is bitwise-identical to the compiled version: both
sum the same multiset of k distances in ascending order with sequential
left-to-right accumulation. ``svm_dual_cd`` runs the same coordinate
sequence; its accumulated weight vector may differ from the compiled one in
the last few ulps because NumPy dot products round differently than the
unrolled C loop, so cross-backend agreement is asserted at the prediction
level rather than bitwise.
"""

import numpy as np

COMPILED = False


def knn_ratio_alphas(D, ref_labels, n_classes, k, exclude_cols):
    """See the compiled kernel: same signature, same conventions."""
    D = np.asarray(D, dtype=np.float64)
    ref_labels = np.asarray(ref_labels, dtype=np.int64)
    exclude_cols = np.asarray(exclude_cols, dtype=np.int64)
    if k <= 0:
        raise ValueError("k must be >= 1")
    n_rows = D.shape[0]
    out = np.empty((n_rows, n_classes), dtype=np.float64)
    class_masks = [ref_labels == y for y in range(n_classes)]
    for i in range(n_rows):
        row = D[i]
        excl = exclude_cols[i]
        valid = np.ones(row.shape[0], dtype=bool)
        if excl >= 0:
            valid[excl] = False
        for y in range(n_classes):
            same = np.sort(row[class_masks[y] & valid])
            other = np.sort(row[~class_masks[y] & valid])
            if same.shape[0] < k or other.shape[0] < k:
                out[i, y] = np.inf
                continue
            num = 0.0
            for v in same[:k]:
                num += v
            den = 0.0
            for v in other[:k]:
                den += v
            if den == 0.0:
                out[i, y] = 0.0 if num == 0.0 else np.inf
            else:
                out[i, y] = num / den
    return out


def svm_dual_cd(X, y, C, tol, max_iter):
    """See the compiled kernel: same signature, same sweep order."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = X.shape[0]
    diag = 0.5 / C
    qd = (X * X).sum(axis=1) + diag
    w = np.zeros(X.shape[1])
    alpha = np.zeros(n)
    it = 0
    while it < max_iter:
        max_pg = 0.0
        for i in range(n):
            G = y[i] * float(X[i] @ w) - 1.0 + diag * alpha[i]
            PG = min(G, 0.0) if alpha[i] == 0.0 else G
            max_pg = max(max_pg, abs(PG))
            if PG != 0.0:
                new = max(alpha[i] - G / qd[i], 0.0)
                if new != alpha[i]:
                    w += (new - alpha[i]) * y[i] * X[i]
                    alpha[i] = new
        it += 1
        if max_pg < tol:
            break
    return w, it
