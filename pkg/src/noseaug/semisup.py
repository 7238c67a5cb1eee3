"""Graph- and cluster-based pseudo-labelers for the active set.

Three methods: label propagation (row-stochastic diffusion with hard
re-clamping of the labelled rows), label spreading (symmetric-normalized
diffusion with soft clamping), and constrained k-means (labelled rows pinned
to their class's cluster). Each assigns exactly one label to every unlabelled
row; a grid search picks the method whose augmented training set scores best
on a validation set.
"""

import warnings
from dataclasses import dataclass

import numpy as np

from . import classify
from ._distances import pairwise_distances
from .data import UNLABELLED, LabeledDataset
from .exceptions import ConfigurationError

_METHODS = ("propagation", "spreading", "kmeans")
_KERNELS = ("knn", "rbf")


@dataclass(frozen=True)
class SemiSupConfig:
    """One pseudo-labeler choice: method, graph kernel, and iteration knobs.

    ``gamma=None`` selects the data-driven bandwidth 20 / median squared
    pairwise distance. ``alpha`` is the spreading clamping factor and is
    ignored by the other methods.
    """

    method: str
    kernel: str = "rbf"
    n_neighbors: int = 7
    gamma: float = None
    alpha: float = 0.2
    max_iterations: int = 1000
    tol: float = 1e-6

    def validate(self):
        if self.method not in _METHODS:
            raise ConfigurationError(f"unknown semisup method {self.method!r}")
        if self.kernel not in _KERNELS:
            raise ConfigurationError(f"unknown kernel {self.kernel!r}")
        if self.n_neighbors < 1:
            raise ConfigurationError("n_neighbors must be >= 1")
        if self.gamma is not None and self.gamma <= 0:
            raise ConfigurationError("gamma must be positive")
        if not 0.0 < self.alpha < 1.0:
            raise ConfigurationError("alpha must lie in (0, 1)")
        if self.max_iterations < 1:
            raise ConfigurationError("max_iterations must be >= 1")


@dataclass
class PseudoLabeledSet:
    """Labels assigned to the unlabelled rows, with per-row confidence.

    ``centers`` is populated by the k-means labeler only.
    """

    rows: np.ndarray
    labels: np.ndarray
    confidence: np.ndarray
    config: SemiSupConfig = None
    centers: np.ndarray = None

    def __post_init__(self):
        if not (len(self.rows) == len(self.labels) == len(self.confidence)):
            raise ConfigurationError("rows/labels/confidence lengths differ")
        if not np.all(np.isfinite(self.confidence)):
            raise ConfigurationError("confidences must be finite")

    def __len__(self):
        return len(self.rows)

    def as_dataset(self, n_classes, class_names=None):
        return LabeledDataset(self.rows, self.labels, n_classes, class_names)


def default_semisup_grid():
    """The default method x kernel (x alpha, spreading only) search grid."""
    grid = []
    for kernel in ("knn", "rbf"):
        grid.append(SemiSupConfig("propagation", kernel=kernel))
    for kernel in ("knn", "rbf"):
        for alpha in (0.2, 0.8):
            grid.append(SemiSupConfig("spreading", kernel=kernel, alpha=alpha))
    grid.append(SemiSupConfig("kmeans"))
    return tuple(grid)


def resolve_gamma(X, gamma):
    """The RBF bandwidth: explicit value, or 20 / median squared distance."""
    if gamma is not None:
        return float(gamma)
    D = pairwise_distances(X)
    sq = np.square(D[np.triu_indices(D.shape[0], k=1)])
    med = float(np.median(sq)) if sq.size else 0.0
    return 20.0 / med if med > 0 else 1.0


def affinity_matrix(X, config):
    """Graph weights between all rows: RBF with unit self-affinity, or a
    symmetrized (mutual-or) kNN connectivity graph with empty diagonal."""
    D = pairwise_distances(X)
    n = D.shape[0]
    if config.kernel == "rbf":
        gamma = resolve_gamma(X, config.gamma)
        return np.exp(-gamma * np.square(D))
    k = min(config.n_neighbors, n - 1)
    W = np.zeros((n, n))
    if k >= 1:
        np.fill_diagonal(D, np.inf)
        nearest = np.argpartition(D, k - 1, axis=1)[:, :k]
        rows = np.repeat(np.arange(n), k)
        W[rows, nearest.ravel()] = 1.0
        W = np.maximum(W, W.T)
    return W


def _check_graph_inputs(labeled, unlabeled, config):
    config.validate()
    if len(labeled) == 0:
        raise ConfigurationError("labeled set is empty")
    if np.any(labeled.y == UNLABELLED):
        raise ConfigurationError("labeled set contains unlabelled rows")
    if np.unique(labeled.y).shape[0] < 2:
        raise ConfigurationError("labeled set must cover >= 2 classes")


def _one_hot(labels, n_classes):
    Y = np.zeros((labels.shape[0], n_classes))
    Y[np.arange(labels.shape[0]), labels] = 1.0
    return Y


def _fallback_nearest_labeled(X_unlabeled, labeled, zero_rows, labels, confidence):
    """Disconnected rows get their nearest labelled neighbour's label at
    confidence zero, so every row still receives exactly one label."""
    if not np.any(zero_rows):
        return
    D = pairwise_distances(X_unlabeled[zero_rows], labeled.X)
    labels[zero_rows] = labeled.y[np.argmin(D, axis=1)]
    confidence[zero_rows] = 0.0


def _diffusion(labeled, unlabeled, config, mode):
    _check_graph_inputs(labeled, unlabeled, config)
    n_l, n_u = len(labeled), len(unlabeled)
    if n_u == 0:
        return PseudoLabeledSet(
            unlabeled.X.copy(), np.empty(0, dtype=np.int64), np.empty(0), config
        )
    X = np.vstack([labeled.X, unlabeled.X])
    W = affinity_matrix(X, config)
    Y = np.vstack([_one_hot(labeled.y, labeled.n_classes), np.zeros((n_u, labeled.n_classes))])
    if mode == "propagation":
        degrees = W.sum(axis=1)
        degrees[degrees == 0.0] = 1.0
        T = W / degrees[:, None]
        F = Y.copy()
        for _ in range(config.max_iterations):
            F_next = T @ F
            F_next[:n_l] = Y[:n_l]
            change = float(np.max(np.abs(F_next - F)))
            F = F_next
            if change < config.tol:
                break
    else:
        degrees = W.sum(axis=1)
        degrees[degrees == 0.0] = 1.0
        inv_sqrt = 1.0 / np.sqrt(degrees)
        S = W * inv_sqrt[:, None] * inv_sqrt[None, :]
        F = Y.copy()
        for _ in range(config.max_iterations):
            F_next = config.alpha * (S @ F) + (1.0 - config.alpha) * Y
            change = float(np.max(np.abs(F_next - F)))
            F = F_next
            if change < config.tol:
                break
    F_u = F[n_l:]
    totals = F_u.sum(axis=1)
    zero_rows = totals <= 0.0
    labels = np.argmax(F_u, axis=1).astype(np.int64)
    with np.errstate(invalid="ignore", divide="ignore"):
        confidence = np.where(zero_rows, 0.0, F_u.max(axis=1) / np.where(totals > 0, totals, 1.0))
    _fallback_nearest_labeled(unlabeled.X, labeled, zero_rows, labels, confidence)
    return PseudoLabeledSet(unlabeled.X.copy(), labels, confidence, config)


def label_propagation(labeled, unlabeled, config):
    """Hard-clamped diffusion: F <- T F with labelled rows reset each step."""
    if config.method != "propagation":
        raise ConfigurationError("config.method must be 'propagation'")
    return _diffusion(labeled, unlabeled, config, "propagation")


def label_spreading(labeled, unlabeled, config):
    """Soft-clamped diffusion: F <- alpha S F + (1 - alpha) Y."""
    if config.method != "spreading":
        raise ConfigurationError("config.method must be 'spreading'")
    return _diffusion(labeled, unlabeled, config, "spreading")


def semi_kmeans(labeled, unlabeled, config):
    """Constrained Lloyd iterations: one cluster per class, centers seeded at
    the labelled class means, labelled rows pinned to their class."""
    if config.method != "kmeans":
        raise ConfigurationError("config.method must be 'kmeans'")
    config.validate()
    if len(labeled) == 0:
        raise ConfigurationError("labeled set is empty")
    present = np.unique(labeled.y[labeled.y != UNLABELLED])
    if present.shape[0] != labeled.n_classes:
        raise ConfigurationError(
            f"labeled set covers {present.shape[0]} of {labeled.n_classes} classes"
        )
    n_classes = labeled.n_classes
    centers = np.vstack([labeled.X[labeled.y == c].mean(axis=0) for c in range(n_classes)])
    n_u = len(unlabeled)
    if n_u == 0:
        return PseudoLabeledSet(
            unlabeled.X.copy(), np.empty(0, dtype=np.int64), np.empty(0), config,
            centers=centers,
        )
    assign = np.full(n_u, -1, dtype=np.int64)
    for _ in range(config.max_iterations):
        D = pairwise_distances(unlabeled.X, centers)
        new_assign = np.argmin(D, axis=1).astype(np.int64)
        for c in range(n_classes):
            members = np.vstack(
                [labeled.X[labeled.y == c], unlabeled.X[new_assign == c]]
            )
            if members.shape[0] == 0:
                worst = int(np.argmax(D[np.arange(n_u), new_assign]))
                centers[c] = unlabeled.X[worst]
            else:
                centers[c] = members.mean(axis=0)
        if np.array_equal(new_assign, assign):
            break
        assign = new_assign
    D = pairwise_distances(unlabeled.X, centers)
    d1 = D[np.arange(n_u), assign]
    if n_classes >= 2:
        d2 = np.partition(D, 1, axis=1)[:, 1]
    else:
        d2 = d1
    with np.errstate(invalid="ignore", divide="ignore"):
        confidence = np.where(d1 + d2 > 0, (d2 - d1) / (d1 + d2), 1.0)
    return PseudoLabeledSet(
        unlabeled.X.copy(), assign, confidence, config, centers=centers
    )


_DISPATCH = {
    "propagation": label_propagation,
    "spreading": label_spreading,
    "kmeans": semi_kmeans,
}


def pseudo_label(labeled, unlabeled, config):
    """Dispatch to the configured method."""
    config.validate()
    return _DISPATCH[config.method](labeled, unlabeled, config)


def best_semisup(labeled, unlabeled, validation, classifier_config, grid=None):
    """Grid-search the pseudo-labelers by downstream validation accuracy.

    Each grid point labels the unlabelled rows, the frozen classifier is
    refit on the augmented training set and scored on ``validation``; the
    first grid point attaining the best score wins. Grid points that raise
    are skipped with a warning.
    """
    if grid is None:
        grid = default_semisup_grid()
    if not grid:
        raise ConfigurationError("semisup grid is empty")
    best, best_acc = None, -1.0
    for config in grid:
        try:
            pseudo = pseudo_label(labeled, unlabeled, config)
            augmented = LabeledDataset(
                np.vstack([labeled.X, pseudo.rows]),
                np.concatenate([labeled.y, pseudo.labels]),
                labeled.n_classes,
                labeled.class_names,
            )
            model = classify.fit(classifier_config, augmented)
            acc = model.accuracy(validation)
        except Exception as exc:  # noqa: BLE001 - per-point isolation is the contract
            warnings.warn(f"semisup grid point {config} failed: {exc}", stacklevel=2)
            continue
        if acc > best_acc:
            best, best_acc = pseudo, acc
    if best is None:
        raise ConfigurationError("every semisup grid point failed")
    return best
