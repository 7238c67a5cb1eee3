"""Inductive conformal prediction with a kNN distance-ratio nonconformity.

The nonconformity of a row under a hypothesized label is the sum of
distances to its k nearest same-label reference rows divided by the sum of
distances to its k nearest other-label rows. Calibration scores come from
the reference set itself, scored leave-one-out under each row's true label
(the combined proper-training/calibration mode). P-values are the usual
rank fractions, and the augmentation filter accepts a row only when its
largest p-value clears both an absolute threshold and a multiplicative gap
over the second largest.
"""

from dataclasses import dataclass

import numpy as np

from . import _backend
from ._distances import pairwise_distances
from .data import UNLABELLED
from .exceptions import ConfigurationError

_POOL_MODES = ("per_label", "pooled")


@dataclass(frozen=True)
class ConformalConfig:
    """Hyperparameters of the conformal scorer and augmentation filter."""

    k: int = 3
    epsilon: float = 0.1
    ratio_threshold: float = 3.0
    calibration_mode: str = "combined"
    calibration_pool: str = "per_label"

    def validate(self):
        if self.k < 1:
            raise ConfigurationError("k must be >= 1")
        if not 0.0 < self.epsilon < 1.0:
            raise ConfigurationError("epsilon must lie in (0, 1)")
        if not self.ratio_threshold >= 1.0:
            raise ConfigurationError("ratio_threshold must be >= 1")
        if self.calibration_mode != "combined":
            raise ConfigurationError(
                f"unsupported calibration mode {self.calibration_mode!r}"
            )
        if self.calibration_pool not in _POOL_MODES:
            raise ConfigurationError(
                f"calibration_pool must be one of {_POOL_MODES}"
            )


DEFAULT_K_GRID = (1, 3, 5)
DEFAULT_EPSILON_GRID = (0.05, 0.1, 0.2)


def default_conformal_grid():
    """The (k, epsilon) grid searched when tuning the augmentation filter."""
    return tuple(
        ConformalConfig(k=k, epsilon=eps)
        for k in DEFAULT_K_GRID
        for eps in DEFAULT_EPSILON_GRID
    )


@dataclass(frozen=True)
class PValueRow:
    """Per-label p-values of one row, with the derived point summaries."""

    p: np.ndarray

    @property
    def predicted_label(self):
        return int(np.argmax(self.p))

    @property
    def credibility(self):
        return float(np.max(self.p))

    @property
    def confidence(self):
        if self.p.shape[0] < 2:
            return 1.0
        return 1.0 - float(np.partition(self.p, -2)[-2])


def _class_counts(labels, n_classes):
    counts = np.zeros(n_classes, dtype=np.int64)
    np.add.at(counts, labels, 1)
    return counts


def _check_sufficient(ref_labels, n_classes, k, loo):
    """Strict-mode precondition: k same-label and k other-label rows exist
    for every hypothesis, after leave-one-out exclusion if applicable."""
    counts = _class_counts(ref_labels, n_classes)
    need = k + 1 if loo else k
    n = ref_labels.shape[0]
    for y in range(n_classes):
        if counts[y] < need:
            raise ConfigurationError(
                f"label {y} has {counts[y]} reference rows, needs {need} "
                f"for k={k}"
            )
        if n - counts[y] < k:
            raise ConfigurationError(
                f"label {y} leaves {n - counts[y]} other-label rows, needs {k}"
            )


def alpha_matrix(D, ref_labels, n_classes, k, loo=False, insufficient="inf"):
    """Nonconformity scores for each row of a distance block.

    ``D[i, j]`` is the distance from scored row i to reference row j; with
    ``loo=True`` row i is reference row i and is excluded from its own
    neighbourhoods. ``insufficient`` picks between the strict contract
    (``"error"``) and the online-learning convention of scoring an
    under-populated hypothesis as +inf (``"inf"``).
    """
    D = np.ascontiguousarray(D, dtype=np.float64)
    ref_labels = np.ascontiguousarray(ref_labels, dtype=np.int64)
    if ref_labels.shape[0] != D.shape[1]:
        raise ConfigurationError("ref_labels length must match D columns")
    if np.any(ref_labels == UNLABELLED):
        raise ConfigurationError("reference rows must all be labelled")
    if insufficient == "error":
        _check_sufficient(ref_labels, n_classes, k, loo)
    elif insufficient != "inf":
        raise ConfigurationError("insufficient must be 'error' or 'inf'")
    if loo:
        if D.shape[0] != D.shape[1]:
            raise ConfigurationError("loo scoring needs a square distance block")
        exclude = np.arange(D.shape[0], dtype=np.int64)
    else:
        exclude = np.full(D.shape[0], -1, dtype=np.int64)
    return _backend.knn_ratio_alphas(D, ref_labels, n_classes, k, exclude)


def calibration_scores(D_ref, ref_labels, n_classes, k, insufficient="inf"):
    """Leave-one-out nonconformity of each reference row under its own label."""
    alphas = alpha_matrix(
        D_ref, ref_labels, n_classes, k, loo=True, insufficient=insufficient
    )
    return alphas[np.arange(alphas.shape[0]), ref_labels]


def p_value_matrix(alphas, cal_scores, ref_labels, n_classes, pool="per_label"):
    """Rank p-values of score rows against the calibration pools.

    ``p[i, y] = (#{j in pool(y): cal_j >= alphas[i, y]} + 1) / (|pool(y)| + 1)``
    with per-label pools by default, or one shared pool of every calibration
    score when ``pool="pooled"``.
    """
    alphas = np.asarray(alphas, dtype=np.float64)
    cal_scores = np.asarray(cal_scores, dtype=np.float64)
    P = np.empty_like(alphas)
    for y in range(n_classes):
        pool_y = cal_scores if pool == "pooled" else cal_scores[ref_labels == y]
        pool_y = np.sort(pool_y)
        n_cal = pool_y.shape[0]
        ge = n_cal - np.searchsorted(pool_y, alphas[:, y], side="left")
        P[:, y] = (ge + 1.0) / (n_cal + 1.0)
    return P


def nonconformity(x, y, reference, k, exclude_index=None):
    """Nonconformity score of one feature vector under one label hypothesis.

    ``exclude_index`` removes a reference row from the neighbour search, for
    scoring a row that is itself part of the reference.
    """
    if not 0 <= y < reference.n_classes:
        raise ConfigurationError(f"label {y} outside [0, {reference.n_classes})")
    x = np.asarray(x, dtype=np.float64).reshape(1, -1)
    D = pairwise_distances(x, reference.X)
    exclude = np.full(1, -1 if exclude_index is None else exclude_index, dtype=np.int64)
    labels = np.ascontiguousarray(reference.y, dtype=np.int64)
    counts = _class_counts(labels, reference.n_classes)
    if exclude_index is not None:
        counts[labels[exclude_index]] -= 1
    n = labels.shape[0] - (0 if exclude_index is None else 1)
    if counts[y] < k:
        raise ConfigurationError(
            f"label {y} has {counts[y]} reference rows, needs {k}"
        )
    if n - counts[y] < k:
        raise ConfigurationError(
            f"label {y} leaves {n - counts[y]} other-label rows, needs {k}"
        )
    alphas = _backend.knn_ratio_alphas(
        np.ascontiguousarray(D), labels, reference.n_classes, k, exclude
    )
    return float(alphas[0, y])


def p_values(x, reference, config):
    """P-values of one feature vector against a labelled reference set."""
    config.validate()
    rows = np.asarray(x, dtype=np.float64)
    single = rows.ndim == 1
    P = p_value_rows(rows.reshape(1, -1) if single else rows, reference, config)
    return P[0] if single else P


def p_value_rows(rows, reference, config, insufficient="error"):
    """PValueRow objects for a batch of feature vectors."""
    config.validate()
    labels = np.ascontiguousarray(reference.y, dtype=np.int64)
    D = pairwise_distances(np.asarray(rows, dtype=np.float64), reference.X)
    D_ref = pairwise_distances(reference.X)
    alphas = alpha_matrix(
        D, labels, reference.n_classes, config.k, insufficient=insufficient
    )
    cal = calibration_scores(
        D_ref, labels, reference.n_classes, config.k, insufficient=insufficient
    )
    P = p_value_matrix(
        alphas, cal, labels, reference.n_classes, pool=config.calibration_pool
    )
    return [PValueRow(P[i]) for i in range(P.shape[0])]


def filter_decisions(P, config):
    """Vectorized dual-criterion filter over a p-value matrix.

    Returns ``(accepted_mask, predicted_labels)``: a row is accepted when its
    credibility reaches ``epsilon`` and its top p-value is at least
    ``ratio_threshold`` times the runner-up; an exact tie between the two
    largest p-values leaves the predicted label ambiguous and rejects the
    row.
    """
    config.validate()
    P = np.asarray(P, dtype=np.float64)
    labels = np.argmax(P, axis=1).astype(np.int64)
    cred = P[np.arange(P.shape[0]), labels]
    if P.shape[1] < 2:
        second = np.zeros(P.shape[0])
    else:
        second = np.partition(P, -2, axis=1)[:, -2]
    with np.errstate(invalid="ignore"):
        gap_ok = cred >= config.ratio_threshold * second
    accepted = (cred >= config.epsilon) & gap_ok & (cred > second)
    return accepted, labels


def filter_rows(rows, config):
    """Spec-shaped filter: PValueRow list in, ``(index, label)`` list out."""
    if not rows:
        return []
    P = np.vstack([r.p for r in rows])
    accepted, labels = filter_decisions(P, config)
    return [(int(i), int(labels[i])) for i in np.flatnonzero(accepted)]
