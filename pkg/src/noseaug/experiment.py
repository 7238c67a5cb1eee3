"""Task grids, repeated runs, the signed-rank test, and summary tables.

A task is one (dataset spec, scenario, classifier) cell. Running it repeats
the partition-tune-augment-score pipeline with fresh partition seeds,
producing an accuracy matrix over (repeat, process). Summaries compare every
process against the supervised baseline with a Wilcoxon signed-rank test and
report +/=/- verdicts at the 0.05 level, with the sign taken from the median
paired difference.
"""

import csv
import json
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import classify, strategies
from .data import (
    NoiseSpec,
    PartitionSpec,
    SyntheticSpec,
    apply_noise,
    derive_seed,
    generate_synthetic,
    partition,
)
from .exceptions import ConfigurationError, InputError
from .strategies import PROCESSES, BatchSchedule, DistanceCache

log = logging.getLogger(__name__)

SIGNIFICANCE = 0.05
SCENARIO_KINDS = ("ratio", "gaussian", "shift")

# Seed-stream tags: every random stream hangs off (base_seed, repeat, tag),
# so a stream never depends on the scenario axis. That makes the zero-noise
# task bitwise-equal to the same-size ratio task, and lets noise tasks share
# their delta draws across c values.
_STREAM_PARTITION = 1
_STREAM_NOISE_VALIDATION = 2
_STREAM_NOISE_TEST = 3
_STREAM_NOISE_ACTIVE = 4
_STREAM_SCHEDULE = 5
_STREAM_P2 = 6


@dataclass(frozen=True)
class TaskSpec:
    """One experiment cell: dataset x scenario x classifier."""

    name: str
    dataset: SyntheticSpec
    scenario_kind: str
    scenario_value: float
    classifier: str
    sizes: tuple
    n_repeats: int = 30
    base_seed: int = 0
    processes: tuple = PROCESSES
    n_batches: int = 4
    # "independent" replays P4 and P5 as two pipelines and intersects them,
    # which makes the reported per-batch P6 additions a subset of P5's; the
    # shared-state variant can break that nesting after batch 1 because the
    # two strategies' training sets diverge.
    eicp_mode: str = "independent"

    def validate(self):
        self.dataset.validate()
        if self.scenario_kind not in SCENARIO_KINDS:
            raise ConfigurationError(
                f"scenario kind must be one of {SCENARIO_KINDS}, "
                f"got {self.scenario_kind!r}"
            )
        if self.scenario_kind != "ratio" and self.scenario_value < 0:
            raise ConfigurationError("noise level must be >= 0")
        if self.classifier not in ("lda", "svm", "knn"):
            raise ConfigurationError(f"unknown classifier {self.classifier!r}")
        if self.n_repeats < 2:
            raise ConfigurationError("n_repeats must be >= 2")
        if len(self.sizes) != 4:
            raise ConfigurationError("sizes must have 4 entries")
        unknown = [p for p in self.processes if p not in PROCESSES]
        if unknown:
            raise ConfigurationError(f"unknown processes {unknown}")


@dataclass
class ResultsTable:
    """Accuracies and provenance for one task across all repeats.

    ``accuracy[r, j]`` is repeat r of ``processes[j]``; NaN marks a repeat
    aborted by a strategy failure (excluded pairwise from the statistics).
    """

    task: TaskSpec
    processes: tuple
    accuracy: np.ndarray
    batch_added: dict = field(default_factory=dict)
    added: dict = field(default_factory=dict)
    failures: list = field(default_factory=list)
    conformal_configs: list = field(default_factory=list)
    classifier_configs: list = field(default_factory=list)

    def medians(self):
        return np.nanmedian(self.accuracy, axis=0)

    def column(self, process):
        return self.accuracy[:, self.processes.index(process)]

    def compare_to_baseline(self, process, baseline="P1"):
        """(statistic, p, median paired difference) vs the baseline column."""
        a = self.column(process)
        b = self.column(baseline)
        valid = ~np.isnan(a) & ~np.isnan(b)
        stat, p = wilcoxon_signed_rank(a[valid], b[valid])
        return stat, p, float(np.median(a[valid] - b[valid]))

    def verdict(self, process, baseline="P1"):
        _, p, med = self.compare_to_baseline(process, baseline)
        return verdict_from(p, med)


def verdict_from(p, median_diff):
    """'+' / '-' when p < 0.05 with a nonzero median difference, else '='."""
    if p < SIGNIFICANCE and median_diff > 0:
        return "+"
    if p < SIGNIFICANCE and median_diff < 0:
        return "-"
    return "="


def _average_ranks(values):
    order = np.argsort(values, kind="stable")
    ranks = np.empty(values.shape[0])
    i = 0
    while i < values.shape[0]:
        j = i
        while j + 1 < values.shape[0] and values[order[j + 1]] == values[order[i]]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


_EXACT_LIMIT = 15


def wilcoxon_signed_rank(a, b):
    """Two-sided Wilcoxon signed-rank test of paired samples.

    Zero differences are dropped; tied absolute differences share average
    ranks. The statistic is min(T+, T-). With at most 15 effective pairs the
    p-value enumerates all sign assignments exactly; larger samples use the
    normal approximation with tie and continuity corrections. All-zero
    differences give (0.0, 1.0).
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise InputError("samples must be 1-d and of equal length")
    if a.shape[0] < 2:
        raise InputError("need at least 2 pairs")
    d = a - b
    d = d[d != 0.0]
    n = d.shape[0]
    if n == 0:
        return 0.0, 1.0
    ranks = _average_ranks(np.abs(d))
    t_plus = float(ranks[d > 0].sum())
    t_minus = float(ranks[d < 0].sum())
    stat = min(t_plus, t_minus)
    if n <= _EXACT_LIMIT:
        signs = (np.arange(2**n)[:, None] >> np.arange(n)) & 1
        plus = signs @ ranks
        total = float(ranks.sum())
        minus = total - plus
        p = float(np.mean(np.minimum(plus, minus) <= stat))
        return stat, p
    mu = n * (n + 1) / 4.0
    _, counts = np.unique(ranks, return_counts=True)
    tie_term = float(((counts**3 - counts)).sum()) / 48.0
    sigma2 = n * (n + 1) * (2 * n + 1) / 24.0 - tie_term
    if sigma2 <= 0:
        return stat, 1.0
    z = (stat - mu + 0.5) / math.sqrt(sigma2)
    p = min(1.0, 2.0 * 0.5 * math.erfc(-z / math.sqrt(2.0)))
    return stat, p


def _scenario_noise(task):
    if task.scenario_kind == "ratio":
        return None
    kind = "gaussian" if task.scenario_kind == "gaussian" else "translational_shift"
    return kind


def run_repeat(task, dataset, repeat, clf_override=None):
    """One repeat: partition, noise, tune, run the selected processes.

    Returns ({process: StrategyResult}, classifier config, conformal
    config)."""
    part = partition(
        dataset,
        PartitionSpec(
            task.sizes, seed=derive_seed(task.base_seed, repeat, _STREAM_PARTITION)
        ),
    )
    noise_kind = _scenario_noise(task)
    if noise_kind is not None:
        c = task.scenario_value
        streams = (
            ("validation", _STREAM_NOISE_VALIDATION),
            ("test", _STREAM_NOISE_TEST),
            ("active", _STREAM_NOISE_ACTIVE),
        )
        for attr, stream in streams:
            spec = NoiseSpec(
                noise_kind, c, seed=derive_seed(task.base_seed, repeat, stream)
            )
            setattr(part, attr, apply_noise(getattr(part, attr), spec))
    schedule = BatchSchedule(
        task.n_batches, seed=derive_seed(task.base_seed, repeat, _STREAM_SCHEDULE)
    )
    clf_config = clf_override or classify.tune(
        task.classifier, part.training, part.validation
    )
    cache = None
    conformal_config = None
    if any(p in task.processes for p in ("P5", "P6")):
        cache = DistanceCache.from_partition(part)
        conformal_config = strategies.tune_conformal(
            part, clf_config, schedule, cache=cache
        )
    results = {}
    for process in task.processes:
        if process == "P1":
            result = strategies.p1_supervised(part, clf_config)
        elif process == "P2":
            result = strategies.p2_noise_augment(
                part, clf_config,
                seed=derive_seed(task.base_seed, repeat, _STREAM_P2),
            )
        elif process == "P3":
            result = strategies.p3_semisup(part, clf_config)
        elif process == "P4":
            result = strategies.p4_classifier_online(part, clf_config, schedule)
        elif process == "P5":
            result = strategies.p5_icp_online(
                part, clf_config, conformal_config, schedule, cache
            )
        else:
            result = strategies.p6_eicp_online(
                part, clf_config, conformal_config, schedule, cache,
                mode=task.eicp_mode,
            )
        results[process] = result
    return results, clf_config, conformal_config


def run_task(task, keep_added=False):
    """All repeats of one task; failures invalidate single repeats only.

    With ``keep_added`` the per-repeat AddedRow provenance is retained in
    ``table.added`` for forensic checks (it is dropped by default to keep
    large grids light)."""
    task.validate()
    dataset = generate_synthetic(task.dataset)
    n = task.n_repeats
    accuracy = np.full((n, len(task.processes)), np.nan)
    table = ResultsTable(task, tuple(task.processes), accuracy)
    for r in range(n):
        try:
            results, clf_config, conformal_config = run_repeat(task, dataset, r)
        except Exception as exc:  # noqa: BLE001 - contract: isolate the repeat
            log.warning("task %s repeat %d failed: %s", task.name, r, exc)
            table.failures.append((r, str(exc)))
            table.classifier_configs.append(None)
            table.conformal_configs.append(None)
            continue
        for j, process in enumerate(table.processes):
            accuracy[r, j] = results[process].accuracy
        for process, result in results.items():
            if result.batch_added:
                table.batch_added.setdefault(process, []).append(
                    (r, list(result.batch_added))
                )
            if keep_added:
                table.added.setdefault(process, []).append((r, result.added))
        table.classifier_configs.append(clf_config)
        table.conformal_configs.append(conformal_config)
    return table


@dataclass
class SummaryReport:
    """Cross-task medians, baseline comparisons, and verdict counts."""

    tasks: list
    processes: tuple
    medians: np.ndarray
    p_values: np.ndarray
    median_diffs: np.ndarray
    verdicts: list
    counts: dict
    batch_added_mean: dict

    def count_of(self, process, symbol):
        return self.counts[process][symbol]


def summarize(tables, baseline="P1"):
    """Fold ResultsTables into the +/=/- matrix and radar-chart medians."""
    if not tables:
        raise ConfigurationError("no results to summarize")
    processes = tables[0].processes
    for t in tables:
        if t.processes != processes:
            raise ConfigurationError("tables disagree on their process lists")
    if baseline not in processes:
        raise ConfigurationError(f"baseline {baseline!r} not among processes")
    n_tasks, n_proc = len(tables), len(processes)
    medians = np.zeros((n_tasks, n_proc))
    p_values = np.ones((n_tasks, n_proc))
    median_diffs = np.zeros((n_tasks, n_proc))
    verdicts = []
    for i, t in enumerate(tables):
        medians[i] = t.medians()
        row = []
        for j, process in enumerate(processes):
            _, p, med = t.compare_to_baseline(process, baseline)
            p_values[i, j] = p
            median_diffs[i, j] = med
            row.append(verdict_from(p, med))
        verdicts.append(row)
    counts = {}
    for j, process in enumerate(processes):
        col = [verdicts[i][j] for i in range(n_tasks)]
        counts[process] = {s: col.count(s) for s in "+=-"}
    batch_added_mean = {}
    for i, t in enumerate(tables):
        per_proc = {}
        for process, entries in t.batch_added.items():
            stacked = np.array([c for _, c in entries], dtype=np.float64)
            per_proc[process] = stacked.mean(axis=0).tolist() if stacked.size else []
        batch_added_mean[t.task.name] = per_proc
    return SummaryReport(
        tasks=[t.task.name for t in tables],
        processes=processes,
        medians=medians,
        p_values=p_values,
        median_diffs=median_diffs,
        verdicts=verdicts,
        counts=counts,
        batch_added_mean=batch_added_mean,
    )


def write_results_csv(tables, fh):
    """Long-form per-repeat accuracies: task,process,repeat,accuracy."""
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(["task", "process", "repeat", "accuracy"])
    for t in tables:
        for j, process in enumerate(t.processes):
            for r in range(t.accuracy.shape[0]):
                v = t.accuracy[r, j]
                writer.writerow(
                    [t.task.name, process, r, "" if np.isnan(v) else format(v, ".17g")]
                )


def read_results_csv(fh):
    """results.csv back into {task: {process: accuracy array}} (NaN = invalid)."""
    reader = csv.reader(fh)
    header = next(reader, None)
    if header != ["task", "process", "repeat", "accuracy"]:
        raise InputError("not a results.csv: bad header")
    cells = {}
    for row in reader:
        if not row:
            continue
        if len(row) != 4:
            raise InputError(f"malformed results row: {row!r}")
        task, process, repeat, acc = row
        cells.setdefault(task, {}).setdefault(process, {})[int(repeat)] = (
            float(acc) if acc != "" else np.nan
        )
    out = {}
    for task, by_proc in cells.items():
        out[task] = {}
        for process, by_rep in by_proc.items():
            n = max(by_rep) + 1
            col = np.full(n, np.nan)
            for r, v in by_rep.items():
                col[r] = v
            out[task][process] = col
    return out


def summarize_results(results, processes=None, baseline="P1"):
    """Summary rows straight from parsed results.csv data.

    Returns {task: {process: (p_value, median_diff, verdict, median)}} —
    the recomputation path used to cross-check a stored summary.
    """
    out = {}
    for task, by_proc in results.items():
        if baseline not in by_proc:
            raise InputError(f"task {task!r} lacks baseline column {baseline!r}")
        base = by_proc[baseline]
        out[task] = {}
        names = processes or sorted(by_proc)
        for process in names:
            col = by_proc[process]
            valid = ~np.isnan(col) & ~np.isnan(base)
            _, p = wilcoxon_signed_rank(col[valid], base[valid])
            med_diff = float(np.median(col[valid] - base[valid]))
            out[task][process] = (
                p,
                med_diff,
                verdict_from(p, med_diff),
                float(np.median(col[valid])),
            )
    return out


def summary_to_json(report):
    """A JSON-ready dict mirroring SummaryReport."""
    return {
        "processes": list(report.processes),
        "tasks": [
            {
                "name": report.tasks[i],
                "median_accuracy": {
                    p: report.medians[i, j]
                    for j, p in enumerate(report.processes)
                },
                "p_vs_baseline": {
                    p: report.p_values[i, j]
                    for j, p in enumerate(report.processes)
                },
                "median_diff": {
                    p: report.median_diffs[i, j]
                    for j, p in enumerate(report.processes)
                },
                "verdicts": {
                    p: report.verdicts[i][j]
                    for j, p in enumerate(report.processes)
                },
                "batch_added_mean": report.batch_added_mean.get(
                    report.tasks[i], {}
                ),
            }
            for i in range(len(report.tasks))
        ],
        "verdict_counts": report.counts,
    }


def write_summary_json(report, fh):
    json.dump(summary_to_json(report), fh, indent=2)
    fh.write("\n")


def write_radar_csv(report, fh):
    """task x process median-accuracy matrix (radar-chart data)."""
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(["task"] + list(report.processes))
    for i, name in enumerate(report.tasks):
        writer.writerow(
            [name] + [format(v, ".17g") for v in report.medians[i]]
        )
