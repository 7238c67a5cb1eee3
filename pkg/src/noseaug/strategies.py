"""The six augmentation strategies, each mapping one dataset partition and a
frozen classifier configuration to a test accuracy.

P1 fits on the training set alone. P2 adds noise-perturbed clones of
training rows. P3 adds the whole active set with graph/cluster pseudo-labels.
P4-P6 consume the active set batch-wise: P4 trusts the classifier's labels
for every row, P5 keeps only rows whose conformal p-values pass a
dual-criterion filter, and P6 additionally requires the classifier and the
conformal argmax label to agree.

Every strategy reads only the partition's training/validation/active
features; active-set ground truth never enters any code path here.
"""

from dataclasses import dataclass, field, replace

import numpy as np

from . import classify, conformal, semisup
from ._distances import pairwise_distances
from .classify import ClassifierConfig
from .conformal import ConformalConfig, default_conformal_grid
from .data import LabeledDataset, feature_sd
from .exceptions import ConfigurationError

PROCESSES = ("P1", "P2", "P3", "P4", "P5", "P6")

P2_C_VALUES = (0.05, 0.1)


@dataclass(frozen=True)
class BatchSchedule:
    """Random assignment of active rows to equal-as-possible batches."""

    n_batches: int = 4
    seed: int = 0

    def validate(self):
        if self.n_batches < 1:
            raise ConfigurationError("n_batches must be >= 1")

    def batches(self, n_active):
        """Disjoint index arrays covering range(n_active); sizes differ <= 1."""
        self.validate()
        order = np.random.default_rng(self.seed).permutation(n_active)
        return np.array_split(order, min(self.n_batches, max(n_active, 1)))


@dataclass(frozen=True)
class AddedRow:
    """Provenance of one row appended to a training set."""

    source: str  # noise_clone | pseudo_label
    label: int
    batch: int  # -1 when the strategy is not batch-wise
    origin: int  # row index into the source set (training for clones, active otherwise)
    accepted_by: tuple = ()


@dataclass
class StrategyResult:
    """Outcome of one strategy on one partition."""

    process: str
    accuracy: float
    added: list = field(default_factory=list)
    batch_accuracies: list = field(default_factory=list)
    batch_added: list = field(default_factory=list)
    classifier_config: ClassifierConfig = None
    conformal_config: ConformalConfig = None

    @property
    def n_added(self):
        return len(self.added)


class DistanceCache:
    """Lazily computed pairwise distances over training + active rows.

    The online strategies and the conformal tuning grid all score subsets of
    the same universe, so one distance matrix per partition serves every
    (k, epsilon) pipeline. Row ids: training rows come first, then active
    rows.
    """

    def __init__(self, X):
        self.X = np.ascontiguousarray(np.asarray(X, dtype=np.float64))
        self._D = None

    @classmethod
    def from_partition(cls, partition):
        cache = cls(np.vstack([partition.training.X, partition.active.X]))
        cache.n_training = len(partition.training)
        return cache

    @property
    def D(self):
        if self._D is None:
            self._D = pairwise_distances(self.X)
        return self._D

    def block(self, row_ids, col_ids):
        return np.ascontiguousarray(self.D[np.ix_(row_ids, col_ids)])

    def rows(self, ids):
        return self.X[ids]


def _resolve_fitter(clf):
    """Accept a ClassifierConfig or any callable dataset -> fitted model."""
    if isinstance(clf, ClassifierConfig):
        return lambda dataset: classify.fit(clf, dataset)
    if callable(clf):
        return clf
    raise ConfigurationError(
        "clf must be a ClassifierConfig or a callable returning a fitted model"
    )


def _config_of(clf):
    return clf if isinstance(clf, ClassifierConfig) else None


def _accuracy(model, dataset):
    return float(np.mean(model.predict(dataset.X) == dataset.y))


def p1_supervised(partition, clf):
    """Baseline: fit on the training set, score on the test set."""
    fit = _resolve_fitter(clf)
    model = fit(partition.training)
    return StrategyResult(
        "P1",
        _accuracy(model, partition.test),
        classifier_config=_config_of(clf),
    )


def make_noise_clones(training, n_clones, c_values, seed):
    """Noise-perturbed copies of training rows.

    Clone i copies training row ``i % n_train`` and adds ``c * SD_j * delta``
    per feature, with the training-set SD as the scale, standard-normal
    ``delta``, and ``c`` cycling through ``c_values`` per clone.
    """
    if not c_values:
        raise ConfigurationError("c_values must be non-empty")
    if any(c < 0 for c in c_values):
        raise ConfigurationError("noise coefficients must be >= 0")
    n_train = len(training)
    sd = feature_sd(training.X)
    rng = np.random.default_rng(seed)
    delta = rng.standard_normal((n_clones, training.n_features))
    src = np.arange(n_clones) % n_train
    c = np.asarray([c_values[i % len(c_values)] for i in range(n_clones)])
    rows = training.X[src] + c[:, None] * sd[None, :] * delta
    return rows, training.y[src].copy(), src


def p2_noise_augment(partition, clf, c_values=P2_C_VALUES, seed=0):
    """Noise-adding augmentation: as many clones as there are active rows."""
    n_clones = len(partition.active)
    if n_clones < 1:
        raise ConfigurationError("active set is empty")
    fit = _resolve_fitter(clf)
    train = partition.training
    rows, labels, src = make_noise_clones(train, n_clones, c_values, seed)
    augmented = LabeledDataset(
        np.vstack([train.X, rows]),
        np.concatenate([train.y, labels]),
        train.n_classes,
        train.class_names,
    )
    model = fit(augmented)
    added = [
        AddedRow("noise_clone", int(labels[i]), -1, int(src[i]))
        for i in range(n_clones)
    ]
    return StrategyResult(
        "P2",
        _accuracy(model, partition.test),
        added=added,
        classifier_config=_config_of(clf),
    )


def p3_semisup(partition, clf, grid=None):
    """Semi-supervised augmentation: pseudo-label every active row with the
    best-of-grid labeler, then refit on the augmented training set."""
    fit = _resolve_fitter(clf)
    train = partition.training
    if len(partition.active) == 0:
        model = fit(train)
        return StrategyResult(
            "P3", _accuracy(model, partition.test), classifier_config=_config_of(clf)
        )
    clf_config = _config_of(clf)
    if clf_config is None:
        raise ConfigurationError("p3_semisup needs a ClassifierConfig for tuning")
    pseudo = semisup.best_semisup(
        train, partition.active, partition.validation, clf_config, grid
    )
    augmented = LabeledDataset(
        np.vstack([train.X, pseudo.rows]),
        np.concatenate([train.y, pseudo.labels]),
        train.n_classes,
        train.class_names,
    )
    model = fit(augmented)
    added = [
        AddedRow("pseudo_label", int(pseudo.labels[i]), -1, i, ("semisup",))
        for i in range(len(pseudo))
    ]
    return StrategyResult(
        "P3",
        _accuracy(model, partition.test),
        added=added,
        classifier_config=clf_config,
    )


def _augmented_dataset(partition, cache, ids, labels):
    template = partition.training
    return LabeledDataset(
        cache.rows(ids), labels, template.n_classes, template.class_names
    )


def p4_classifier_online(partition, clf, schedule=BatchSchedule()):
    """Classifier-based online learning: predict each batch with the current
    model, add every row with its predicted label, refit."""
    if len(partition.active) < 1:
        raise ConfigurationError("active set is empty")
    fit = _resolve_fitter(clf)
    train = partition.training
    X_parts = [train.X]
    y_parts = [train.y]
    model = fit(train)
    added = []
    batch_added = []
    batch_acc = [_accuracy(model, partition.test)]
    for b, batch in enumerate(schedule.batches(len(partition.active))):
        rows = partition.active.X[batch]
        labels = model.predict(rows)
        X_parts.append(rows)
        y_parts.append(labels)
        current = LabeledDataset(
            np.vstack(X_parts),
            np.concatenate(y_parts),
            train.n_classes,
            train.class_names,
        )
        model = fit(current)
        batch_acc.append(_accuracy(model, partition.test))
        batch_added.append(int(batch.shape[0]))
        added.extend(
            AddedRow("pseudo_label", int(labels[i]), b, int(batch[i]), ("classifier",))
            for i in range(batch.shape[0])
        )
    return StrategyResult(
        "P4",
        batch_acc[-1],
        added=added,
        batch_accuracies=batch_acc,
        batch_added=batch_added,
        classifier_config=_config_of(clf),
    )


def _icp_filter_pass(partition, config, schedule, cache):
    """Run the conformal filter over the batched active set.

    Returns (final ids, final labels, per-batch accepted (ids, labels)).
    Ids index the cache universe: training rows first, then active rows.
    """
    n_train = len(partition.training)
    ids = np.arange(n_train)
    labels = partition.training.y.copy()
    per_batch = []
    for batch in schedule.batches(len(partition.active)):
        batch_ids = batch + n_train
        D_ref = cache.block(ids, ids)
        cal = conformal.calibration_scores(
            D_ref, labels, partition.training.n_classes, config.k
        )
        alphas = conformal.alpha_matrix(
            cache.block(batch_ids, ids),
            labels,
            partition.training.n_classes,
            config.k,
        )
        P = conformal.p_value_matrix(
            alphas, cal, labels, partition.training.n_classes,
            pool=config.calibration_pool,
        )
        accepted, p_labels = conformal.filter_decisions(P, config)
        ids = np.concatenate([ids, batch_ids[accepted]])
        labels = np.concatenate([labels, p_labels[accepted]])
        per_batch.append((batch_ids[accepted], p_labels[accepted]))
    return ids, labels, per_batch


def p5_icp_online(
    partition,
    clf,
    conformal_config=ConformalConfig(),
    schedule=BatchSchedule(),
    cache=None,
):
    """ICP online learning: add only rows whose conformal prediction passes
    the credibility and p-value-ratio criteria, labelled by argmax p."""
    if len(partition.active) < 1:
        raise ConfigurationError("active set is empty")
    conformal_config.validate()
    fit = _resolve_fitter(clf)
    if cache is None:
        cache = DistanceCache.from_partition(partition)
    n_train = len(partition.training)
    ids, labels, per_batch = _icp_filter_pass(
        partition, conformal_config, schedule, cache
    )
    model = fit(partition.training)
    batch_acc = [_accuracy(model, partition.test)]
    added = []
    batch_added = []
    upto = n_train
    for b, (batch_ids, batch_labels) in enumerate(per_batch):
        upto += batch_ids.shape[0]
        current = _augmented_dataset(partition, cache, ids[:upto], labels[:upto])
        model = fit(current)
        batch_acc.append(_accuracy(model, partition.test))
        batch_added.append(int(batch_ids.shape[0]))
        added.extend(
            AddedRow(
                "pseudo_label",
                int(batch_labels[i]),
                b,
                int(batch_ids[i] - n_train),
                ("conformal",),
            )
            for i in range(batch_ids.shape[0])
        )
    return StrategyResult(
        "P5",
        batch_acc[-1],
        added=added,
        batch_accuracies=batch_acc,
        batch_added=batch_added,
        classifier_config=_config_of(clf),
        conformal_config=conformal_config,
    )


def p6_eicp_online(
    partition,
    clf,
    conformal_config=ConformalConfig(),
    schedule=BatchSchedule(),
    cache=None,
    mode="shared",
):
    """Ensemble ICP online learning: a row is added only when the conformal
    filter accepts it and the classifier predicts the same label.

    ``mode="shared"`` keeps one evolving training set consulted by both the
    classifier and the conformal scorer. ``mode="independent"`` replays the
    literal two-pipeline construction: P4 and P5 run on their own evolving
    sets and P6 keeps the rows they agree on.
    """
    if len(partition.active) < 1:
        raise ConfigurationError("active set is empty")
    if mode not in ("shared", "independent"):
        raise ConfigurationError(f"unknown eicp mode {mode!r}")
    conformal_config.validate()
    fit = _resolve_fitter(clf)
    if cache is None:
        cache = DistanceCache.from_partition(partition)
    train = partition.training
    n_train = len(train)
    n_classes = train.n_classes

    model = fit(train)
    batch_acc = [_accuracy(model, partition.test)]
    added = []
    batch_added = []
    ids = np.arange(n_train)
    labels = train.y.copy()

    if mode == "independent":
        p4_labels = {}
        p4_model = model
        X4 = [train.X]
        y4 = [train.y]
        p5_ids, p5_labels_all, p5_batches = _icp_filter_pass(
            partition, conformal_config, schedule, cache
        )

    for b, batch in enumerate(schedule.batches(len(partition.active))):
        batch_ids = batch + n_train
        if mode == "shared":
            clf_labels = model.predict(cache.rows(batch_ids))
            D_ref = cache.block(ids, ids)
            cal = conformal.calibration_scores(D_ref, labels, n_classes,
                                               conformal_config.k)
            alphas = conformal.alpha_matrix(
                cache.block(batch_ids, ids), labels, n_classes, conformal_config.k
            )
            P = conformal.p_value_matrix(
                alphas, cal, labels, n_classes,
                pool=conformal_config.calibration_pool,
            )
            icp_ok, p_labels = conformal.filter_decisions(P, conformal_config)
            take = icp_ok & (clf_labels == p_labels)
            new_ids = batch_ids[take]
            new_labels = p_labels[take]
        else:
            clf_labels = p4_model.predict(cache.rows(batch_ids))
            X4.append(cache.rows(batch_ids))
            y4.append(clf_labels)
            p4_model = fit(
                LabeledDataset(np.vstack(X4), np.concatenate(y4), n_classes,
                               train.class_names)
            )
            for i in range(batch_ids.shape[0]):
                p4_labels[int(batch_ids[i])] = int(clf_labels[i])
            acc_ids, acc_labels = p5_batches[b]
            agree = np.array(
                [p4_labels[int(acc_ids[i])] == int(acc_labels[i])
                 for i in range(acc_ids.shape[0])],
                dtype=bool,
            ) if acc_ids.shape[0] else np.zeros(0, dtype=bool)
            new_ids = acc_ids[agree]
            new_labels = acc_labels[agree]
        ids = np.concatenate([ids, new_ids])
        labels = np.concatenate([labels, new_labels])
        model = fit(_augmented_dataset(partition, cache, ids, labels))
        batch_acc.append(_accuracy(model, partition.test))
        batch_added.append(int(new_ids.shape[0]))
        added.extend(
            AddedRow(
                "pseudo_label",
                int(new_labels[i]),
                b,
                int(new_ids[i] - n_train),
                ("classifier", "conformal"),
            )
            for i in range(new_ids.shape[0])
        )
    return StrategyResult(
        "P6",
        batch_acc[-1],
        added=added,
        batch_accuracies=batch_acc,
        batch_added=batch_added,
        classifier_config=_config_of(clf),
        conformal_config=conformal_config,
    )


def tune_conformal(
    partition, clf, schedule=BatchSchedule(), grid=None, cache=None
):
    """Pick the (k, epsilon) pair whose filtered augmentation scores best on
    the validation set; ties keep the earlier grid entry."""
    if grid is None:
        grid = default_conformal_grid()
    if not grid:
        raise ConfigurationError("conformal grid is empty")
    fit = _resolve_fitter(clf)
    if cache is None:
        cache = DistanceCache.from_partition(partition)
    best, best_acc = None, -1.0
    for config in grid:
        config.validate()
        ids, labels, _ = _icp_filter_pass(partition, config, schedule, cache)
        model = fit(_augmented_dataset(partition, cache, ids, labels))
        acc = _accuracy(model, partition.validation)
        if acc > best_acc:
            best, best_acc = config, acc
    return best
