"""Label-efficient augmentation strategies for drift-prone sensor classification.

The package couples a small synthetic-data harness with six training-set
augmentation strategies — noise cloning, graph/cluster pseudo-labeling, and
three flavours of batch-wise online learning, the strictest of which accepts
an unlabelled row only when a conformal-prediction filter and the classifier
agree on its label — plus a repeat/statistics driver for comparing them.
"""

from ._backend import BACKEND, COMPILED
from .classify import ClassifierConfig, FittedModel, fit, tune
from .conformal import (
    ConformalConfig,
    PValueRow,
    filter_rows,
    nonconformity,
    p_values,
)
from .data import (
    UNLABELLED,
    LabeledDataset,
    NoiseSpec,
    Partition,
    PartitionSpec,
    SensorRecord,
    SyntheticSpec,
    apply_noise,
    derive_seed,
    extract_features,
    feature_sd,
    generate_synthetic,
    load_csv,
    partition,
    save_csv,
)
from .exceptions import (
    ConfigurationError,
    CsvParseError,
    DegenerateClassError,
    Error,
    InputError,
    ValidationError,
)
from .experiment import (
    ResultsTable,
    SummaryReport,
    TaskSpec,
    run_task,
    summarize,
    wilcoxon_signed_rank,
)
from .semisup import (
    PseudoLabeledSet,
    SemiSupConfig,
    best_semisup,
    label_propagation,
    label_spreading,
    semi_kmeans,
)
from .strategies import (
    AddedRow,
    BatchSchedule,
    DistanceCache,
    StrategyResult,
    p1_supervised,
    p2_noise_augment,
    p3_semisup,
    p4_classifier_online,
    p5_icp_online,
    p6_eicp_online,
    tune_conformal,
)

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "COMPILED",
    "UNLABELLED",
    "AddedRow",
    "BatchSchedule",
    "ClassifierConfig",
    "ConfigurationError",
    "ConformalConfig",
    "CsvParseError",
    "DegenerateClassError",
    "DistanceCache",
    "Error",
    "FittedModel",
    "InputError",
    "LabeledDataset",
    "NoiseSpec",
    "PValueRow",
    "Partition",
    "PartitionSpec",
    "PseudoLabeledSet",
    "ResultsTable",
    "SemiSupConfig",
    "SensorRecord",
    "StrategyResult",
    "SummaryReport",
    "SyntheticSpec",
    "TaskSpec",
    "ValidationError",
    "apply_noise",
    "best_semisup",
    "derive_seed",
    "extract_features",
    "feature_sd",
    "filter_rows",
    "fit",
    "generate_synthetic",
    "label_propagation",
    "label_spreading",
    "load_csv",
    "nonconformity",
    "p1_supervised",
    "p2_noise_augment",
    "p3_semisup",
    "p4_classifier_online",
    "p5_icp_online",
    "p6_eicp_online",
    "p_values",
    "partition",
    "run_task",
    "save_csv",
    "semi_kmeans",
    "summarize",
    "tune",
    "tune_conformal",
    "wilcoxon_signed_rank",
    "__version__",
]
