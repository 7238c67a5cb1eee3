"""Synthetic data generation, raw-signal features, partitioning, noise, CSV I/O.

Datasets are plain float64 matrices with an integer label vector; the value
``UNLABELLED`` (-1) marks rows without a label. All randomness is driven by
explicit integer seeds through ``numpy.random.default_rng``, so every
operation here is a pure function of its arguments.
"""

import csv
import os
import re
from dataclasses import dataclass, field, replace

import numpy as np

from .exceptions import (
    ConfigurationError,
    CsvParseError,
    InputError,
    ValidationError,
)

UNLABELLED = -1

N_CHANNELS = 16
FEATURES_PER_CHANNEL = 8
N_FEATURES = N_CHANNELS * FEATURES_PER_CHANNEL

# Covariance shape used by generate_synthetic: every class shares one strong
# low-rank "common-mode" component (sensor channels moving together) plus a
# weak isotropic part, so class identity lives in the mean offsets while most
# per-feature variance is class-independent.
_LOWRANK_DIM = 3
_ISO_WEIGHT = 0.5
_COMMON_WEIGHT = 5.0


@dataclass
class LabeledDataset:
    """A feature matrix with (possibly partial) integer labels.

    ``y[i] == UNLABELLED`` means row i has no label. ``n_classes`` fixes the
    valid label range [0, n_classes) independently of which labels happen to
    be present.
    """

    X: np.ndarray
    y: np.ndarray
    n_classes: int
    class_names: tuple = None

    def __post_init__(self):
        self.X = np.ascontiguousarray(np.asarray(self.X, dtype=np.float64))
        self.y = np.asarray(self.y, dtype=np.int64)
        if self.X.ndim != 2:
            raise ValidationError("feature matrix must be 2-dimensional")
        if self.y.shape != (self.X.shape[0],):
            raise ValidationError(
                f"{self.X.shape[0]} rows but {self.y.shape[0]} labels"
            )
        if self.n_classes <= 0:
            raise ValidationError("n_classes must be positive")
        if not np.all(np.isfinite(self.X)):
            raise ValidationError("features must be finite")
        labelled = self.y[self.y != UNLABELLED]
        if labelled.size and (labelled.min() < 0 or labelled.max() >= self.n_classes):
            raise ValidationError(
                f"labels must lie in [0, {self.n_classes}) or be {UNLABELLED}"
            )
        if self.class_names is not None:
            self.class_names = tuple(self.class_names)
            if len(self.class_names) != self.n_classes:
                raise ValidationError("class_names length must equal n_classes")

    def __len__(self):
        return self.X.shape[0]

    @property
    def n_features(self):
        return self.X.shape[1]

    @property
    def labelled_mask(self):
        return self.y != UNLABELLED

    def subset(self, indices):
        """A copy of the selected rows (labels included)."""
        idx = np.asarray(indices, dtype=np.intp)
        return LabeledDataset(
            self.X[idx].copy(), self.y[idx].copy(), self.n_classes, self.class_names
        )

    def without_labels(self):
        """A copy with every label stripped."""
        return LabeledDataset(
            self.X.copy(),
            np.full(len(self), UNLABELLED, dtype=np.int64),
            self.n_classes,
            self.class_names,
        )

    def class_counts(self):
        counts = np.zeros(self.n_classes, dtype=np.int64)
        labelled = self.y[self.y != UNLABELLED]
        np.add.at(counts, labelled, 1)
        return counts


@dataclass(frozen=True)
class SyntheticSpec:
    """Parameters of the multiclass Gaussian generator.

    Each class is a Gaussian with a random mean (scale ``separation``) and a
    spherical-plus-low-rank covariance (scale ``within_scale``) shared by all
    classes, so class overlap is tunable and baseline accuracy can be placed
    anywhere between chance and saturation. The dominant low-rank part mimics
    correlated drift across sensor channels: it inflates every per-feature
    standard deviation, which makes data-scaled perturbations consequential
    without making the classes inseparable.
    """

    n_classes: int
    samples_per_class: int
    n_features: int = N_FEATURES
    separation: float = 1.0
    within_scale: float = 1.0
    seed: int = 0

    def validate(self):
        if self.n_classes <= 0 or self.samples_per_class <= 0 or self.n_features <= 0:
            raise ConfigurationError("counts in a synthetic spec must be positive")
        if self.separation <= 0 or self.within_scale <= 0:
            raise ConfigurationError("separation and within_scale must be positive")


def generate_synthetic(spec):
    """Draw a class-balanced dataset; deterministic given ``spec.seed``."""
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    k, n, d = spec.n_classes, spec.samples_per_class, spec.n_features
    means = rng.normal(0.0, spec.separation, size=(k, d))
    loadings = rng.normal(size=(d, _LOWRANK_DIM)) / np.sqrt(_LOWRANK_DIM)
    blocks = []
    for c in range(k):
        iso = rng.normal(size=(n, d))
        common = rng.normal(size=(n, _LOWRANK_DIM)) @ loadings.T
        blocks.append(
            means[c]
            + spec.within_scale * (_ISO_WEIGHT * iso + _COMMON_WEIGHT * common)
        )
    X = np.vstack(blocks)
    y = np.repeat(np.arange(k, dtype=np.int64), n)
    return LabeledDataset(X, y, n_classes=k)


def feature_sd(X):
    """Per-feature sample standard deviation (ddof=1) of a matrix or dataset."""
    if isinstance(X, LabeledDataset):
        X = X.X
    X = np.asarray(X, dtype=np.float64)
    if X.shape[0] < 2:
        return np.zeros(X.shape[1])
    return X.std(axis=0, ddof=1)


@dataclass(frozen=True)
class NoiseSpec:
    """Additive per-feature noise: ``c * sd_j`` scaled by a standard-normal
    draw (``gaussian``) or applied as a deterministic offset
    (``translational_shift``)."""

    kind: str
    c: float
    seed: int = 0

    def validate(self):
        if self.kind not in ("gaussian", "translational_shift"):
            raise ConfigurationError(f"unknown noise kind {self.kind!r}")
        if self.c < 0:
            raise ConfigurationError("noise coefficient c must be >= 0")


def apply_noise(dataset, spec, sd=None):
    """Perturbed copy of ``dataset``; labels pass through unchanged.

    ``sd`` overrides the per-feature reference scale; by default it is the
    sample SD of the set being perturbed.
    """
    spec.validate()
    if sd is None:
        sd = feature_sd(dataset)
    sd = np.asarray(sd, dtype=np.float64)
    if sd.shape != (dataset.n_features,):
        raise InputError(
            f"sd has shape {sd.shape}, expected ({dataset.n_features},)"
        )
    if spec.kind == "gaussian":
        rng = np.random.default_rng(spec.seed)
        delta = rng.standard_normal(dataset.X.shape)
        noisy = dataset.X + spec.c * sd * delta
    else:
        noisy = dataset.X + spec.c * sd
    return LabeledDataset(noisy, dataset.y.copy(), dataset.n_classes, dataset.class_names)


@dataclass(frozen=True)
class PartitionSpec:
    """Sizes of the four splits: (training, validation, test, active)."""

    sizes: tuple
    stratified: bool = True
    seed: int = 0

    def validate(self, dataset=None):
        if len(self.sizes) != 4:
            raise ConfigurationError("sizes must have exactly 4 entries")
        if any(int(s) <= 0 for s in self.sizes):
            raise ConfigurationError("every split size must be positive")
        if dataset is not None:
            if sum(self.sizes) > len(dataset):
                raise ConfigurationError(
                    f"split sizes sum to {sum(self.sizes)} but the dataset has "
                    f"{len(dataset)} rows"
                )
            if self.stratified:
                for s in self.sizes:
                    if s % dataset.n_classes:
                        raise ConfigurationError(
                            f"stratified split size {s} is not divisible by "
                            f"{dataset.n_classes} classes"
                        )


@dataclass
class Partition:
    """The four disjoint splits of one repeat.

    ``active`` has its labels stripped; ``active_truth`` keeps them for
    post-hoc analysis only and must never be read by a strategy.
    """

    training: LabeledDataset
    validation: LabeledDataset
    test: LabeledDataset
    active: LabeledDataset
    active_truth: np.ndarray
    indices: dict = field(default_factory=dict)


def partition(dataset, spec):
    """Split a fully labelled dataset into the four disjoint sets."""
    spec.validate(dataset)
    if np.any(dataset.y == UNLABELLED):
        raise ConfigurationError("cannot partition a dataset with unlabelled rows")
    rng = np.random.default_rng(spec.seed)
    n_train, n_val, n_test, n_active = (int(s) for s in spec.sizes)
    if spec.stratified:
        per_split = [s // dataset.n_classes for s in (n_train, n_val, n_test, n_active)]
        parts = [[], [], [], []]
        for c in range(dataset.n_classes):
            pool = np.flatnonzero(dataset.y == c)
            if pool.size < sum(per_split):
                raise ConfigurationError(
                    f"class {c} has {pool.size} rows, needs {sum(per_split)}"
                )
            pool = rng.permutation(pool)
            start = 0
            for part, quota in zip(parts, per_split):
                part.append(pool[start : start + quota])
                start += quota
        idx = [np.concatenate(p) for p in parts]
    else:
        order = rng.permutation(len(dataset))
        bounds = np.cumsum([n_train, n_val, n_test, n_active])
        idx = [
            order[: bounds[0]],
            order[bounds[0] : bounds[1]],
            order[bounds[1] : bounds[2]],
            order[bounds[2] : bounds[3]],
        ]
    train, val, test, active_full = (dataset.subset(i) for i in idx)
    return Partition(
        training=train,
        validation=val,
        test=test,
        active=active_full.without_labels(),
        active_truth=active_full.y.copy(),
        indices={
            "training": idx[0],
            "validation": idx[1],
            "test": idx[2],
            "active": idx[3],
        },
    )


_HEADER_RE = re.compile(r"^f(\d+)$")


def save_csv(dataset, path):
    """Write ``f0,...,f{d-1},label`` rows; 17 significant digits per value."""
    tmp = f"{path}.tmp"
    with open(tmp, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"f{j}" for j in range(dataset.n_features)] + ["label"])
        for row, label in zip(dataset.X, dataset.y):
            cells = [format(v, ".17g") for v in row]
            cells.append("" if label == UNLABELLED else str(int(label)))
            writer.writerow(cells)
    os.replace(tmp, path)


def load_csv(path, n_features=N_FEATURES, n_classes=None):
    """Parse a dataset written by :func:`save_csv`.

    The file must carry exactly ``n_features`` feature columns (pass ``None``
    to accept any width). ``n_classes`` validates the label range when given;
    otherwise it is inferred as ``max(label) + 1``. Errors carry the
    offending file line.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise CsvParseError("empty file", line=1) from None
        if len(header) < 2 or header[-1] != "label":
            raise CsvParseError("header must be f0,...,f{d-1},label", line=1)
        if n_features is not None and len(header) - 1 != n_features:
            raise CsvParseError(
                f"expected {n_features} feature columns, found {len(header) - 1}",
                line=1,
            )
        n_features = len(header) - 1
        for j, name in enumerate(header[:-1]):
            m = _HEADER_RE.match(name)
            if not m or int(m.group(1)) != j:
                raise CsvParseError(f"unexpected feature column {name!r}", line=1)
        rows, labels = [], []
        for lineno, cells in enumerate(reader, start=2):
            if not cells:
                continue
            if len(cells) != n_features + 1:
                raise CsvParseError(
                    f"expected {n_features + 1} columns, found {len(cells)}",
                    line=lineno,
                )
            try:
                values = [float(c) for c in cells[:-1]]
            except ValueError as exc:
                raise CsvParseError(f"non-numeric cell ({exc})", line=lineno) from None
            if not all(np.isfinite(values)):
                raise CsvParseError("non-finite feature value", line=lineno)
            raw = cells[-1].strip()
            if raw == "":
                label = UNLABELLED
            else:
                try:
                    label = int(raw)
                except ValueError:
                    raise CsvParseError(
                        f"label {raw!r} is not an integer", line=lineno
                    ) from None
                if label < 0:
                    raise ValidationError(f"line {lineno}: negative label {label}")
            rows.append(values)
            labels.append(label)
    if not rows:
        raise CsvParseError("no data rows", line=2)
    y = np.asarray(labels, dtype=np.int64)
    if n_classes is None:
        present = y[y != UNLABELLED]
        n_classes = int(present.max()) + 1 if present.size else 1
    else:
        bad = np.flatnonzero((y != UNLABELLED) & (y >= n_classes))
        if bad.size:
            raise ValidationError(
                f"line {bad[0] + 2}: label {y[bad[0]]} outside [0, {n_classes})"
            )
    return LabeledDataset(np.asarray(rows, dtype=np.float64), y, n_classes)


@dataclass(frozen=True)
class SensorRecord:
    """One multichannel acquisition: 16 equal-length voltage traces."""

    channels: np.ndarray
    sample_period: float

    def validate(self):
        ch = np.asarray(self.channels, dtype=np.float64)
        if ch.ndim != 2 or ch.shape[0] != N_CHANNELS:
            raise InputError(f"expected {N_CHANNELS} channels, got shape {ch.shape}")
        if ch.shape[1] < 3:
            raise InputError("channels must have at least 3 samples")
        if self.sample_period <= 0:
            raise InputError("sample_period must be positive")
        return ch


def _ema(values, alpha):
    out = np.empty_like(values)
    acc = values[0]
    out[0] = acc
    for t in range(1, len(values)):
        acc = alpha * values[t] + (1.0 - alpha) * acc
        out[t] = acc
    return out


def extract_features(record, smoothing_factors=(0.1, 0.5, 0.9)):
    """128 features: per channel the peak value, the trapezoidal integral,
    and the (max, min) of the exponentially smoothed first difference at each
    smoothing factor."""
    channels = record.validate()
    factors = tuple(float(a) for a in smoothing_factors)
    if len(factors) != 3:
        raise ConfigurationError("exactly 3 smoothing factors are required")
    if any(not 0.0 < a <= 1.0 for a in factors):
        raise ConfigurationError("smoothing factors must lie in (0, 1]")
    if not (factors[0] < factors[1] < factors[2]):
        raise ConfigurationError("smoothing factors must be strictly increasing")
    out = np.empty(N_FEATURES)
    for c, ch in enumerate(channels):
        base = c * FEATURES_PER_CHANNEL
        out[base] = ch.max()
        out[base + 1] = np.trapezoid(ch, dx=record.sample_period)
        diff = np.diff(ch)
        for i, alpha in enumerate(factors):
            ema = _ema(diff, alpha)
            out[base + 2 + 2 * i] = ema.max()
            out[base + 3 + 2 * i] = ema.min()
    return out


def derive_seed(*entropy):
    """Deterministic child seed from a tuple of non-negative integers.

    The scheme is ``SeedSequence([e0, e1, ...]).generate_state(1)[0]``; every
    random stream in the experiment harness names its seed this way so a
    single root seed reproduces a whole run.
    """
    state = np.random.SeedSequence([int(e) for e in entropy]).generate_state(1)
    return int(state[0])
