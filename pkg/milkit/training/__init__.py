"""
Training, evaluation, splits and benchmarking
"""

from milkit.training.run_config import RunConfig
from milkit.training.metrics import Metrics, auroc, classification_metrics, compute_metrics, evaluate
from milkit.training.splits import SplitSet, make_splits
from milkit.training.trainer import Trainer, build_optimizer, train
from milkit.training.benchmark import format_mean_std, mean_std, run_benchmark
from milkit.training.reports import Stopwatch, read_json, write_json, write_report

__all__ = [
    "RunConfig",
    "Metrics",
    "auroc",
    "classification_metrics",
    "compute_metrics",
    "evaluate",
    "SplitSet",
    "make_splits",
    "Trainer",
    "build_optimizer",
    "train",
    "format_mean_std",
    "mean_std",
    "run_benchmark",
    "Stopwatch",
    "read_json",
    "write_json",
    "write_report",
]
