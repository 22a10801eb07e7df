"""
Command implementations behind the milkit CLI
"""

import logging
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np
from rich.console import Console
from rich.table import Table

from milkit.cli.config_file import CLIConfig, parse_config
from milkit.config import settings
from milkit.data.bag import Bag
from milkit.datasets.processed import MANIFEST, ProcessedMILDataset, save_dataset
from milkit.datasets.synthetic import generate
from milkit.exceptions import ConfigError, DatasetError
from milkit.models.checkpoint import METADATA, load_checkpoint, read_checkpoint_config, save_checkpoint
from milkit.models.factory import build_model
from milkit.training.benchmark import run_benchmark
from milkit.training.metrics import Metrics, evaluate
from milkit.training.reports import Stopwatch, environment, read_json, write_json, write_report
from milkit.training.splits import SplitSet, make_splits
from milkit.training.trainer import train

logger = logging.getLogger(__name__)

console = Console(markup=False, highlight=False, soft_wrap=True)

CHECKPOINT_DIR = "checkpoint"
REPORT = "report.json"
SPLITS = "splits.json"
EVAL_REPORT = "eval.json"
SPLIT_CHOICES = ("all", "train", "val", "test")


def open_dataset(path: str) -> ProcessedMILDataset:
    resolved = Path(settings.resolve_data_path(path))
    if not resolved.is_dir():
        raise DatasetError(f"dataset not found: {resolved}")
    return ProcessedMILDataset(resolved)


def load_bags(config: CLIConfig) -> List[Bag]:
    """Bags of the configured dataset: generated for a synthetic spec, read for a path"""
    if config.dataset_path is None:
        return generate(config.dataset)
    return list(open_dataset(config.dataset_path))


def dataset_summary(bags: List[Bag]) -> Tuple[int, int, float]:
    sizes = np.array([bag.n_instances for bag in bags])
    return len(bags), sum(bag.label for bag in bags), float(sizes.mean())


def print_metrics(title: str, metrics: Metrics) -> None:
    line = f"{title}: {metrics.summary()}"
    if metrics.inst_auroc is not None:
        line += f"  inst-AUROC {metrics.inst_auroc:.3f}"
    console.print(line)


def cmd_datagen(config: CLIConfig) -> Path:
    """Generate the configured synthetic dataset into ``output_dir``"""
    if config.dataset_path is not None:
        raise ConfigError("datagen needs a synthetic 'dataset' section, not a path")
    bags = generate(config.dataset)
    root = Path(config.output_dir)
    save_dataset(bags, root)

    n_bags, positives, mean_size = dataset_summary(bags)
    console.print(f"n_bags={n_bags}  positives={positives}  mean_size={mean_size:.2f}")
    console.print(f"dataset written to {root}")
    return root


def _resume(output_dir: Path) -> Metrics:
    """Re-evaluate a finished run with the configuration recorded in its report"""
    checkpoint = output_dir / CHECKPOINT_DIR
    if not (checkpoint / METADATA).is_file():
        raise DatasetError(f"no checkpoint to resume from in {output_dir}")
    stored = parse_config(read_json(output_dir / REPORT)["config"])

    bags = {bag.bag_id: bag for bag in load_bags(stored)}
    splits = SplitSet.load(output_dir / SPLITS)
    model = load_checkpoint(checkpoint)
    metrics = evaluate(model, [bags[i] for i in splits.val[0]], stored.run.batch_size, stored.run.device)
    print_metrics("resumed (evaluation only)", metrics)
    return metrics


def cmd_train(config: CLIConfig, resume: bool = False) -> Metrics:
    """
    Train the configured model on a seeded train/val split of the dataset.

    Writes ``checkpoint/``, ``report.json`` (with a ``report.timing.json`` sidecar)
    and ``splits.json`` into ``output_dir``. With ``resume`` an existing run in
    ``output_dir`` is re-evaluated on its validation split instead.
    """
    output_dir = Path(config.output_dir)
    run = config.run
    if resume:
        return _resume(output_dir)

    stopwatch = Stopwatch()
    with stopwatch.phase("load"):
        bags = load_bags(config)
        by_id = {bag.bag_id: bag for bag in bags}
        model_config = config.model_config(bags[0].feature_dim)
        splits = make_splits(
            list(by_id), [bag.label for bag in bags], k=1,
            val_fraction=run.val_fraction, test_fraction=0.0, seed=run.seed,
        )
    train_ids, val_ids = splits.repetition(0)

    logger.info("Training %s on %d bags, validating on %d", model_config.model_name, len(train_ids), len(val_ids))
    with stopwatch.phase("train"):
        model = build_model(model_config, seed=run.seed)
        model, metrics = train(model, [by_id[i] for i in train_ids], [by_id[i] for i in val_ids], run)

    output_dir.mkdir(parents=True, exist_ok=True)
    save_checkpoint(model, output_dir / CHECKPOINT_DIR)
    splits.save(output_dir / SPLITS)
    write_report({
        "config": config.to_dict(),
        "model": model_config.to_dict(),
        "history": metrics.history,
        "metrics": metrics.to_dict(with_history=False),
        "environment": environment(run.seed),
    }, output_dir / REPORT, stopwatch)

    print_metrics("final", metrics)
    return metrics


def cmd_eval(checkpoint: str, dataset: str, split: str = "all", output: Optional[str] = None) -> Metrics:
    """
    Evaluate a saved checkpoint on a processed dataset.

    ``split`` other than ``all`` selects bags through the ``splits.json`` stored
    next to the checkpoint directory.
    """
    if split not in SPLIT_CHOICES:
        raise ConfigError(f"--split must be one of {list(SPLIT_CHOICES)}, got {split!r}")
    checkpoint_dir = Path(checkpoint)
    if not checkpoint_dir.is_dir():
        raise DatasetError(f"checkpoint not found: {checkpoint_dir}")

    model = load_checkpoint(checkpoint_dir)
    data = open_dataset(dataset)
    if data.data_dim != model.in_dim:
        raise ConfigError(
            f"dimension mismatch: dataset feature dimension {data.data_dim} != model in_dim {model.in_dim}"
        )

    if split == "all":
        bags = list(data)
    else:
        splits = SplitSet.load(checkpoint_dir.parent / SPLITS)
        ids = {"train": splits.train[0], "val": splits.val[0], "test": splits.test}[split]
        bags = [data.load_bag(i) for i in ids]

    metrics = evaluate(model, bags, device=settings.device)
    print_metrics(f"eval ({split}, {len(bags)} bags)", metrics)

    out = Path(output) if output is not None else checkpoint_dir.parent
    write_json({
        "checkpoint": str(checkpoint_dir),
        "dataset": str(data.root),
        "split": split,
        "metrics": metrics.to_dict(with_history=False),
    }, out / EVAL_REPORT)
    return metrics


def cmd_benchmark(config: CLIConfig):
    """Benchmark the configured models over ``benchmark.k`` seeded repetitions"""
    bags = load_bags(config)
    models = config.benchmark_models(bags[0].feature_dim)
    options = config.benchmark
    splits = make_splits(
        [bag.bag_id for bag in bags], [bag.label for bag in bags], k=options.k,
        val_fraction=config.run.val_fraction, test_fraction=options.test_fraction, seed=config.run.seed,
    )
    output_dir = Path(config.output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)
    splits.save(output_dir / SPLITS)

    table = run_benchmark(models, bags, splits, config.run, output_dir=output_dir, n_jobs=options.n_jobs)
    formatted = read_json(output_dir / "benchmark.json")["table"]

    view = Table(title=f"Benchmark (k={splits.k}, mean_{{std}})")
    for column in ("model", "ACC", "AUROC", "F1"):
        view.add_column(column)
    for model in table["model"]:
        cells = formatted[model]
        view.add_row(model, cells["acc"], cells["auroc"], cells["f1"])
    console.print(view)
    return table


def cmd_inspect(path: str) -> dict:
    """Summarize a dataset directory or a checkpoint directory"""
    target = Path(path)
    if (target / METADATA).is_file():
        model = load_checkpoint(target)
        n_params = sum(p.numel() for p in model.parameters())
        summary = {
            "kind": "checkpoint",
            "config": read_checkpoint_config(target).to_dict(),
            "parameters": n_params,
            "in_shape": list(model.in_shape),
            "instance_scores": model.score_kind,
        }
        console.print(f"checkpoint {target}: {model.name}, {n_params} parameters")
        console.print(f"  in_shape: {model.in_shape}  instance scores: {model.score_kind}")
        for key, value in summary["config"].items():
            if value is not None:
                console.print(f"  {key}: {value}")
        return summary

    resolved = Path(settings.resolve_data_path(path))
    if not (resolved / MANIFEST).is_file():
        raise DatasetError(f"{path} is neither a dataset nor a checkpoint directory")
    data = ProcessedMILDataset(resolved)
    sizes = np.array([data.load_bag(i).n_instances for i in data.bag_ids])
    summary = {
        "kind": "dataset",
        "n_bags": len(data),
        "positives": int(data.labels.sum()),
        "mean_size": float(sizes.mean()),
        "min_size": int(sizes.min()),
        "max_size": int(sizes.max()),
        "fields": sorted(data.fields),
        "data_dim": data.data_dim,
    }
    console.print(f"dataset {resolved}")
    for key, value in summary.items():
        if key != "kind":
            console.print(f"  {key}: {value}")
    return summary
