"""Command-line front end: generate datasets, run task grids, emit reports.

Commands read one JSON config (schema below, unknown keys rejected) and
write their outputs atomically (temp file + rename). Exit codes: 0 success,
1 config error, 2 runtime error.

Config schema::

    {
      "seed": 0,                     # root seed for every task
      "output_dir": "out",
      "n_repeats": 30,
      "n_batches": 4,
      "eicp_mode": "independent",    # or "shared"
      "processes": ["P1", ..., "P6"],
      "classifiers": ["lda", "svm"],
      "datasets": {
        "d1": {"n_classes": 12, "samples_per_class": 50, "n_features": 128,
                "separation": 1.0, "within_scale": 1.0, "seed": 7}
      },
      "tasks": [
        {"dataset": "d1", "scenario": "ratio", "value": 0.5,
         "sizes": [120, 120, 120, 240]}
      ]
    }

Each task entry expands across ``classifiers`` into TaskSpecs named
``<dataset>/<classifier>/<scenario><value>``.
"""

import argparse
import json
import os
import sys

from . import experiment
from .data import SyntheticSpec, generate_synthetic, save_csv
from .exceptions import ConfigurationError, Error
from .experiment import TaskSpec
from .strategies import PROCESSES

_TOP_KEYS = {
    "seed": int,
    "output_dir": str,
    "n_repeats": int,
    "n_batches": int,
    "eicp_mode": str,
    "processes": list,
    "classifiers": list,
    "datasets": dict,
    "tasks": list,
}
_TOP_REQUIRED = ("datasets",)
_TOP_DEFAULTS = {
    "seed": 0,
    "output_dir": "out",
    "n_repeats": 30,
    "n_batches": 4,
    "eicp_mode": "independent",
    "processes": list(PROCESSES),
    "classifiers": ["lda", "svm"],
    "tasks": [],
}

_DATASET_KEYS = {
    "n_classes": int,
    "samples_per_class": int,
    "n_features": int,
    "separation": (int, float),
    "within_scale": (int, float),
    "seed": int,
}
_DATASET_REQUIRED = ("n_classes", "samples_per_class")

_TASK_KEYS = {
    "dataset": str,
    "scenario": str,
    "value": (int, float),
    "sizes": list,
}
_TASK_REQUIRED = ("dataset", "scenario", "value", "sizes")


def _check_keys(mapping, allowed, required, where):
    if not isinstance(mapping, dict):
        raise ConfigurationError(f"{where} must be an object")
    for key in mapping:
        if key not in allowed:
            raise ConfigurationError(f"unknown key {key!r} in {where}")
    for key in required:
        if key not in mapping:
            raise ConfigurationError(f"{where} is missing required key {key!r}")
    for key, types in allowed.items():
        if key in mapping and not isinstance(mapping[key], types):
            type_name = getattr(types, "__name__", "number")
            raise ConfigurationError(
                f"{where}.{key} must be of type {type_name}"
            )


def load_config(path, seed_override=None, out_override=None):
    """Parse and validate the JSON config into plain Python values."""
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigurationError(f"cannot read config: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"config is not valid JSON: {exc}") from None
    _check_keys(raw, _TOP_KEYS, _TOP_REQUIRED, "config")
    config = dict(_TOP_DEFAULTS)
    config.update(raw)
    if seed_override is not None:
        config["seed"] = seed_override
    if out_override is not None:
        config["output_dir"] = out_override

    datasets = {}
    for name, entry in config["datasets"].items():
        _check_keys(entry, _DATASET_KEYS, _DATASET_REQUIRED, f"datasets.{name}")
        spec = SyntheticSpec(**entry)
        spec.validate()
        datasets[name] = spec
    if not datasets:
        raise ConfigurationError("config.datasets must define at least one dataset")
    config["datasets"] = datasets

    for process in config["processes"]:
        if process not in PROCESSES:
            raise ConfigurationError(f"config.processes: unknown process {process!r}")
    for family in config["classifiers"]:
        if family not in ("lda", "svm", "knn"):
            raise ConfigurationError(f"config.classifiers: unknown family {family!r}")
    if config["eicp_mode"] not in ("shared", "independent"):
        raise ConfigurationError("config.eicp_mode must be 'shared' or 'independent'")

    for i, entry in enumerate(config["tasks"]):
        _check_keys(entry, _TASK_KEYS, _TASK_REQUIRED, f"tasks[{i}]")
        if entry["dataset"] not in datasets:
            raise ConfigurationError(
                f"tasks[{i}].dataset {entry['dataset']!r} is not in config.datasets"
            )
        if entry["scenario"] not in experiment.SCENARIO_KINDS:
            raise ConfigurationError(
                f"tasks[{i}].scenario must be one of {experiment.SCENARIO_KINDS}"
            )
        if len(entry["sizes"]) != 4 or not all(
            isinstance(s, int) and s > 0 for s in entry["sizes"]
        ):
            raise ConfigurationError(
                f"tasks[{i}].sizes must be 4 positive integers"
            )
    return config


def build_tasks(config, only=None):
    """Expand config tasks across classifiers into validated TaskSpecs."""
    processes = tuple(config["processes"])
    if only:
        unknown = [p for p in only if p not in PROCESSES]
        if unknown:
            raise ConfigurationError(f"--only: unknown processes {unknown}")
        processes = tuple(p for p in PROCESSES if p in only)
        if "P1" not in processes:
            raise ConfigurationError("--only must include the baseline P1")
    tasks = []
    for entry in config["tasks"]:
        for family in config["classifiers"]:
            value = entry["value"]
            name = f"{entry['dataset']}/{family}/{entry['scenario']}{value:g}"
            task = TaskSpec(
                name=name,
                dataset=config["datasets"][entry["dataset"]],
                scenario_kind=entry["scenario"],
                scenario_value=float(value),
                classifier=family,
                sizes=tuple(entry["sizes"]),
                n_repeats=config["n_repeats"],
                base_seed=config["seed"],
                processes=processes,
                n_batches=config["n_batches"],
                eicp_mode=config["eicp_mode"],
            )
            task.validate()
            tasks.append(task)
    return tasks


def _write_atomic(path, write_fn):
    tmp = f"{path}.tmp"
    with open(tmp, "w", newline="") as fh:
        write_fn(fh)
    os.replace(tmp, path)


def _write_json_atomic(path, payload):
    _write_atomic(path, lambda fh: (json.dump(payload, fh, indent=2), fh.write("\n")))


def cmd_generate(args):
    config = load_config(args.config, args.seed, args.out)
    out_dir = config["output_dir"]
    os.makedirs(out_dir, exist_ok=True)
    manifest = {"root_seed": config["seed"], "datasets": {}}
    for name, spec in config["datasets"].items():
        dataset = generate_synthetic(spec)
        path = os.path.join(out_dir, f"{name}.csv")
        save_csv(dataset, path)
        manifest["datasets"][name] = {
            "path": os.path.basename(path),
            "rows": len(dataset),
            "n_classes": dataset.n_classes,
            "n_features": dataset.n_features,
            "seed": spec.seed,
        }
        print(f"wrote {path} ({len(dataset)} rows)")
    _write_json_atomic(os.path.join(out_dir, "manifest.json"), manifest)
    return 0


def _task_manifest(task):
    return {
        "name": task.name,
        "dataset": {
            "n_classes": task.dataset.n_classes,
            "samples_per_class": task.dataset.samples_per_class,
            "n_features": task.dataset.n_features,
            "separation": task.dataset.separation,
            "within_scale": task.dataset.within_scale,
            "seed": task.dataset.seed,
        },
        "scenario": {"kind": task.scenario_kind, "value": task.scenario_value},
        "classifier": task.classifier,
        "sizes": list(task.sizes),
        "n_repeats": task.n_repeats,
        "base_seed": task.base_seed,
        "processes": list(task.processes),
        "n_batches": task.n_batches,
        "eicp_mode": task.eicp_mode,
    }


def _run_tasks(tasks, jobs):
    if jobs <= 1:
        return [experiment.run_task(t) for t in tasks]
    from concurrent.futures import ProcessPoolExecutor

    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(experiment.run_task, tasks))


def cmd_run(args):
    config = load_config(args.config, args.seed, args.out)
    only = args.only.split(",") if args.only else None
    tasks = build_tasks(config, only)
    if not tasks:
        raise ConfigurationError("config defines no tasks")
    out_dir = config["output_dir"]
    os.makedirs(out_dir, exist_ok=True)
    tables = _run_tasks(tasks, args.jobs)
    report = experiment.summarize(tables)
    _write_atomic(
        os.path.join(out_dir, "results.csv"),
        lambda fh: experiment.write_results_csv(tables, fh),
    )
    _write_atomic(
        os.path.join(out_dir, "summary.json"),
        lambda fh: experiment.write_summary_json(report, fh),
    )
    _write_json_atomic(
        os.path.join(out_dir, "manifest.json"),
        {
            "root_seed": config["seed"],
            "n_repeats": config["n_repeats"],
            "tasks": [_task_manifest(t) for t in tasks],
            "failures": {
                t.task.name: [[r, msg] for r, msg in t.failures]
                for t in tables
                if t.failures
            },
        },
    )
    for t in tables:
        meds = ", ".join(
            f"{p}={m:.3f}" for p, m in zip(t.processes, t.medians())
        )
        print(f"{t.task.name}: {meds}")
    print(f"wrote {out_dir}/results.csv, summary.json, manifest.json")
    return 0


def cmd_report(args):
    results_path = os.path.join(args.results_dir, "results.csv")
    if not os.path.exists(results_path):
        raise Error(f"no results.csv under {args.results_dir}")
    with open(results_path, newline="") as fh:
        results = experiment.read_results_csv(fh)
    if not results:
        raise Error(f"{results_path} holds no rows")
    first = next(iter(results.values()))
    processes = list(first)
    rows = experiment.summarize_results(results, processes)
    width = max(len(t) for t in rows)
    print(f"{'task':<{width}}  " + "  ".join(f"{p:>4}" for p in processes))
    for task, by_proc in rows.items():
        cells = "  ".join(f"{by_proc[p][2]:>4}" for p in processes)
        print(f"{task:<{width}}  {cells}")
    counts = {
        p: {s: sum(1 for t in rows if rows[t][p][2] == s) for s in "+=-"}
        for p in processes
    }
    count_cells = "  ".join(
        "/".join(str(counts[p][s]) for s in "+=-") for p in processes
    )
    print(f"{'counts +/=/-':<{width}}  {count_cells}")
    radar_path = os.path.join(args.results_dir, "radar.csv")

    def write_radar(fh):
        import csv as _csv

        writer = _csv.writer(fh, lineterminator="\n")
        writer.writerow(["task"] + processes)
        for task, by_proc in rows.items():
            writer.writerow(
                [task] + [format(by_proc[p][3], ".17g") for p in processes]
            )

    _write_atomic(radar_path, write_radar)
    print(f"wrote {radar_path}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="noseaug",
        description="Augmentation-strategy experiments over unlabelled data",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_gen = sub.add_parser("generate", help="write dataset CSVs from a config")
    p_gen.add_argument("config", help="JSON config path")
    p_gen.add_argument("--seed", type=int, default=None, help="override root seed")
    p_gen.add_argument("--out", default=None, help="override output directory")
    p_gen.set_defaults(func=cmd_generate)

    p_run = sub.add_parser("run", help="run the configured task grid")
    p_run.add_argument("config", help="JSON config path")
    p_run.add_argument("--seed", type=int, default=None, help="override root seed")
    p_run.add_argument("--out", default=None, help="override output directory")
    p_run.add_argument(
        "--only", default=None, help="comma-separated process subset (must keep P1)"
    )
    p_run.add_argument("--jobs", type=int, default=1, help="parallel task workers")
    p_run.set_defaults(func=cmd_run)

    p_rep = sub.add_parser("report", help="verdict table + radar.csv from results")
    p_rep.add_argument("results_dir", help="directory holding results.csv")
    p_rep.set_defaults(func=cmd_report)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigurationError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except Error as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - runtime errors exit with code 2
        print(f"error: {exc!r}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
