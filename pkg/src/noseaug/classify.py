"""Supervised classifiers behind one fit/predict interface, plus grid tuning.

Three families: shared-covariance Gaussian discriminant (``lda``), one-vs-rest
linear squared-hinge SVM trained by deterministic dual coordinate descent
(``svm``), and majority-vote k-nearest-neighbours (``knn``). All are
deterministic given their config and training data.
"""

from dataclasses import dataclass

import numpy as np

from . import _backend
from ._distances import pairwise_distances
from .data import UNLABELLED, LabeledDataset
from .exceptions import ConfigurationError, DegenerateClassError, InputError

SVM_C_GRID = (0.1, 1.0, 10.0, 100.0)
KNN_K_GRID = (1, 3, 5)

_LDA_SHRINKAGE = 1e-3
_SVM_TOL = 1e-3
_SVM_MAX_ITER = 1000
_SVM_BIAS = 1.0


@dataclass(frozen=True)
class ClassifierConfig:
    """Frozen hyperparameters for one classifier family."""

    family: str
    C: float = 1.0
    k: int = 3
    shrinkage: float = _LDA_SHRINKAGE
    standardize: bool = False

    def validate(self):
        if self.family not in ("lda", "svm", "knn"):
            raise ConfigurationError(f"unknown classifier family {self.family!r}")
        if self.C <= 0:
            raise ConfigurationError("C must be positive")
        if self.k < 1:
            raise ConfigurationError("k must be >= 1")
        if not 0 <= self.shrinkage <= 1:
            raise ConfigurationError("shrinkage must lie in [0, 1]")


class FittedModel:
    """Immutable prediction-stage state for one fitted classifier.

    ``classes`` holds the labels seen at fit time; predictions are indices
    into the original label space, never outside ``classes``.
    """

    def __init__(self, config, classes, params, scale=None):
        self.config = config
        self.classes = classes
        self.params = params
        self.scale = scale

    @property
    def family(self):
        return self.config.family

    def _prepare(self, rows):
        X = np.ascontiguousarray(np.asarray(rows, dtype=np.float64))
        if X.ndim == 1:
            X = X[None, :]
        if X.ndim != 2 or X.shape[1] != self.params["n_features"]:
            raise InputError(
                f"rows have {X.shape[-1] if X.ndim else 0} features, model "
                f"expects {self.params['n_features']}"
            )
        if self.scale is not None:
            X = (X - self.scale[0]) / self.scale[1]
        return X

    def predict_scores(self, rows):
        """Per-class decision scores, one column per label in [0, n_classes).

        Classes absent at fit time get a large negative score so they can
        never win the argmax while every score stays finite.
        """
        X = self._prepare(rows)
        n_classes = self.params["n_classes"]
        scores = np.full((X.shape[0], n_classes), -1e300)
        if self.family == "lda":
            scores[:, self.classes] = (
                X @ self.params["coef"].T + self.params["intercept"]
            )
        elif self.family == "svm":
            Xb = np.hstack([X, np.full((X.shape[0], 1), _SVM_BIAS)])
            margins = Xb @ self.params["weights"].T
            if len(self.classes) == 2:
                scores[:, self.classes[0]] = -margins[:, 0]
                scores[:, self.classes[1]] = margins[:, 0]
            else:
                scores[:, self.classes] = margins
        else:
            D = pairwise_distances(X, self.params["X"])
            k = min(self.config.k, self.params["X"].shape[0])
            nearest = np.argpartition(D, k - 1, axis=1)[:, :k]
            votes = np.zeros((X.shape[0], n_classes))
            for i in range(X.shape[0]):
                np.add.at(votes[i], self.params["y"][nearest[i]], 1.0)
            scores[:, self.classes] = votes[:, self.classes]
        return scores

    def predict(self, rows):
        """Argmax-of-scores labels; score ties go to the lowest class index."""
        return np.argmax(self.predict_scores(rows), axis=1).astype(np.int64)

    def accuracy(self, dataset):
        return float(np.mean(self.predict(dataset.X) == dataset.y))


def _check_labelled(train):
    if len(train) == 0:
        raise ConfigurationError("training set is empty")
    if np.any(train.y == UNLABELLED):
        raise ConfigurationError("training set contains unlabelled rows")


def _fit_lda(config, train, classes):
    counts = np.array([(train.y == c).sum() for c in classes])
    if counts.min() < 2:
        bad = classes[int(np.argmin(counts))]
        raise DegenerateClassError(
            f"class {bad} has {counts.min()} sample(s); LDA needs >= 2"
        )
    X, y = train.X, train.y
    n, d = X.shape
    means = np.vstack([X[y == c].mean(axis=0) for c in classes])
    centered = X - means[np.searchsorted(classes, y)]
    # Pooled covariance with denominator n (not n-k): invariant under uniform
    # row duplication, which keeps zero-noise cloning a true no-op.
    cov = centered.T @ centered / n
    lam = config.shrinkage
    cov = (1.0 - lam) * cov + lam * np.diag(np.diag(cov))
    try:
        coef = np.linalg.solve(cov, means.T).T
    except np.linalg.LinAlgError:
        # Fully degenerate covariance (e.g. zero within-class variance):
        # an absolute ridge keeps the nearest-mean behaviour of the limit.
        ridge = lam * max(1.0, float(np.trace(cov)) / d)
        coef = np.linalg.solve(cov + ridge * np.eye(d), means.T).T
    intercept = -0.5 * np.einsum("ij,ij->i", coef, means) + np.log(counts / n)
    return {"n_features": d, "n_classes": train.n_classes, "coef": coef,
            "intercept": intercept}


def _fit_svm(config, train, classes):
    X = np.hstack([train.X, np.full((len(train), 1), _SVM_BIAS)])
    X = np.ascontiguousarray(X)
    weights = []
    if len(classes) == 2:
        targets = np.where(train.y == classes[1], 1.0, -1.0)
        w, _ = _backend.svm_dual_cd(X, targets, config.C, _SVM_TOL, _SVM_MAX_ITER)
        weights.append(w)
    else:
        for c in classes:
            targets = np.where(train.y == c, 1.0, -1.0)
            w, _ = _backend.svm_dual_cd(X, targets, config.C, _SVM_TOL, _SVM_MAX_ITER)
            weights.append(w)
    return {"n_features": train.n_features, "n_classes": train.n_classes,
            "weights": np.vstack(weights)}


def fit(config, train):
    """Fit one classifier on a fully labelled dataset."""
    config.validate()
    _check_labelled(train)
    classes = np.unique(train.y)
    scale = None
    if config.standardize:
        mu = train.X.mean(axis=0)
        sigma = train.X.std(axis=0)
        sigma[sigma == 0.0] = 1.0
        train = LabeledDataset(
            (train.X - mu) / sigma, train.y, train.n_classes, train.class_names
        )
        scale = (mu, sigma)
    if config.family == "lda":
        params = _fit_lda(config, train, classes)
    elif config.family == "svm":
        params = _fit_svm(config, train, classes)
    else:
        params = {"n_features": train.n_features, "n_classes": train.n_classes,
                  "X": train.X.copy(), "y": train.y.copy()}
    return FittedModel(config, classes, params, scale)


def default_grid(family):
    """The frozen hyperparameter grid searched by :func:`tune`."""
    if family == "svm":
        return tuple(ClassifierConfig("svm", C=c) for c in SVM_C_GRID)
    if family == "knn":
        return tuple(ClassifierConfig("knn", k=k) for k in KNN_K_GRID)
    return (ClassifierConfig("lda"),)


def tune(family, train, validation, grid=None):
    """Pick the grid config with the best validation accuracy.

    Ties break toward the earlier grid entry; the default grids are ordered
    by increasing C / k, so ties favour the smaller hyperparameter.
    """
    if grid is None:
        grid = default_grid(family)
    if not grid:
        raise ConfigurationError("hyperparameter grid is empty")
    if len(validation) == 0:
        raise ConfigurationError("validation set is empty")
    best, best_acc = None, -1.0
    for config in grid:
        if config.family != family:
            raise ConfigurationError(
                f"grid entry family {config.family!r} does not match {family!r}"
            )
        acc = fit(config, train).accuracy(validation)
        if acc > best_acc:
            best, best_acc = config, acc
    return best
