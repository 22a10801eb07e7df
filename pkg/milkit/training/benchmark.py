"""
Multi-model benchmark over repeated train/validation splits
"""

import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from milkit.data.bag import Bag
from milkit.exceptions import DatasetError
from milkit.models.factory import ModelConfig, build_model
from milkit.training.reports import write_json
from milkit.training.run_config import RunConfig
from milkit.training.splits import SplitSet
from milkit.training.trainer import train
from milkit.training.metrics import evaluate

logger = logging.getLogger(__name__)

METRIC_NAMES = ("acc", "auroc", "f1")
COLUMNS = ["model"] + [f"{name}_{stat}" for name in METRIC_NAMES for stat in ("mean", "std")]
STD_CONVENTION = "population (ddof=0, divide by k)"


def mean_std(values: Sequence[float]) -> Tuple[float, float]:
    values = np.asarray(values, dtype=np.float64)
    return float(values.mean()), float(values.std(ddof=0))


def format_mean_std(values: Sequence[float]) -> str:
    """``[0.90, 0.94]`` -> ``"0.920_{0.020}"``"""
    mean, std = mean_std(values)
    return f"{mean:.3f}_{{{std:.3f}}}"


def _model_labels(configs: Sequence[ModelConfig]) -> List[str]:
    # repeated model names get a positional suffix so table rows stay unique
    names = [config.model_name for config in configs]
    return [name if names.count(name) == 1 else f"{name}#{i}" for i, name in enumerate(names)]


def _run_repetition(rep: int, configs: Sequence[ModelConfig], labels: Sequence[str],
                    bags: Mapping[str, Bag], splits: SplitSet, config: RunConfig,
                    output_dir: Optional[str]) -> Dict[str, Dict[str, Any]]:
    train_ids, val_ids = splits.repetition(rep)
    train_bags = [bags[i] for i in train_ids]
    val_bags = [bags[i] for i in val_ids]
    test_bags = [bags[i] for i in splits.test] or val_bags
    run_config = replace(config, seed=config.seed + rep)

    results = {}
    for label, model_config in zip(labels, configs):
        logger.info("Repetition %d: training %s on %d bags", rep, label, len(train_bags))
        model = build_model(model_config, seed=run_config.seed)
        model, val_metrics = train(model, train_bags, val_bags, run_config)
        test_metrics = evaluate(model, test_bags, run_config.batch_size, run_config.device)
        results[label] = {
            "val": val_metrics.to_dict(with_history=False),
            "test": test_metrics.to_dict(with_history=False),
            "history": val_metrics.history,
        }

    if output_dir is not None:
        write_json({"repetition": rep, "seed": run_config.seed, "results": results},
                   Path(output_dir) / f"rep_{rep}" / "metrics.json")
    return results


def run_benchmark(model_configs: Sequence[ModelConfig], dataset: Sequence[Bag], splits: SplitSet,
                  config: RunConfig, output_dir: Optional[Union[str, os.PathLike]] = None,
                  n_jobs: int = 1) -> pd.DataFrame:
    """
    Train every model on each of the ``splits.k`` repetitions and score it on the
    fixed test set (the validation split when no test set was held out).

    Args:
        model_configs: Models to compare; one table row each
        dataset: Bags addressable by the split bag ids (a ``ProcessedMILDataset`` works)
        splits: Train/val repetitions plus the fixed test set
        config: Training hyperparameters; repetition ``r`` trains with ``seed + r``
        output_dir: When given, receives ``benchmark.csv``, ``benchmark.json`` and ``rep_<r>/``
        n_jobs: Worker processes for repetitions; 1 runs them in order in this process

    Returns:
        Table with columns model, acc_mean, acc_std, auroc_mean, auroc_std, f1_mean, f1_std
    """
    if not model_configs:
        raise DatasetError("benchmark needs at least one model")
    config.validate()
    splits.validate()
    bags = {bag.bag_id: bag for bag in dataset}
    missing = sorted({*splits.test, *(i for rep in splits.train + splits.val for i in rep)} - set(bags))
    if missing:
        raise DatasetError(f"split references unknown bag ids: {missing[:5]}")

    labels = _model_labels(model_configs)
    out = str(output_dir) if output_dir is not None else None
    args = (model_configs, labels, bags, splits, config, out)
    if n_jobs > 1:
        logger.info("Running %d repetitions on %d worker processes", splits.k, n_jobs)
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            futures = [pool.submit(_run_repetition, rep, *args) for rep in range(splits.k)]
            per_rep = [future.result() for future in futures]
    else:
        per_rep = [_run_repetition(rep, *args) for rep in range(splits.k)]

    rows, formatted = [], {}
    for label in labels:
        row: Dict[str, Any] = {"model": label}
        formatted[label] = {}
        for name in METRIC_NAMES:
            values = [rep_results[label]["test"][name] for rep_results in per_rep]
            row[f"{name}_mean"], row[f"{name}_std"] = mean_std(values)
            formatted[label][name] = format_mean_std(values)
        rows.append(row)
    table = pd.DataFrame(rows, columns=COLUMNS)

    if out is not None:
        root = Path(out)
        root.mkdir(parents=True, exist_ok=True)
        table.to_csv(root / "benchmark.csv", index=False, float_format="%.6f", lineterminator="\n")
        write_json({
            "std_convention": STD_CONVENTION,
            "k": splits.k,
            "run": config.to_dict(),
            "models": {label: c.to_dict() for label, c in zip(labels, model_configs)},
            "splits": [
                {label: {"val": r[label]["val"], "test": r[label]["test"]} for label in labels}
                for r in per_rep
            ],
            "table": formatted,
        }, root / "benchmark.json")
        logger.info("Benchmark written to %s", root)
    return table
