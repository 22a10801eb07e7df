"""
Run reports: deterministic JSON documents plus a wall-clock sidecar
"""

import json
import logging
import os
import platform
import time
from contextlib import contextmanager
from pathlib import Path
from typing import Any, Dict, Iterator, Mapping, Union

import numpy as np
import torch

from milkit.config import settings
from milkit.exceptions import DatasetError

logger = logging.getLogger(__name__)

PathLike = Union[str, os.PathLike]


def _default(value: Any) -> Any:
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, Path):
        return str(value)
    raise TypeError(f"Object of type {type(value).__name__} is not JSON serializable")


def dumps(data: Mapping[str, Any]) -> str:
    """Byte-stable JSON: sorted keys, two-space indent, trailing newline"""
    return json.dumps(data, indent=2, sort_keys=True, default=_default, allow_nan=True) + "\n"


def write_json(data: Mapping[str, Any], path: PathLike) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(dumps(data), encoding="utf-8", newline="\n")
    except OSError as e:
        raise DatasetError(f"cannot write report {path}: {e}") from e
    logger.debug("Wrote %s", path)
    return path


def read_json(path: PathLike) -> Dict[str, Any]:
    path = Path(path)
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        raise DatasetError(f"cannot read report {path}: {e}") from e


def timing_path(report_path: PathLike) -> Path:
    """``report.json`` -> ``report.timing.json``"""
    path = Path(report_path)
    return path.with_name(f"{path.stem}.timing{path.suffix}")


def environment(seed: int) -> Dict[str, Any]:
    return {
        "seed": seed,
        "app": settings.app_name,
        "version": settings.version,
        "python": platform.python_version(),
        "torch": torch.__version__,
        "numpy": np.__version__,
    }


class Stopwatch:
    """Collects named wall-clock durations for the timing sidecar"""

    def __init__(self):
        self.started_at = time.time()
        self.durations: Dict[str, float] = {}

    @contextmanager
    def phase(self, name: str) -> Iterator[None]:
        start = time.perf_counter()
        try:
            yield
        finally:
            self.durations[name] = self.durations.get(name, 0.0) + time.perf_counter() - start

    def to_dict(self) -> Dict[str, Any]:
        return {
            "started_at": time.strftime("%Y-%m-%dT%H:%M:%S%z", time.localtime(self.started_at)),
            "seconds": {name: round(value, 6) for name, value in self.durations.items()},
        }


def write_report(report: Mapping[str, Any], path: PathLike, stopwatch: Stopwatch = None) -> Path:
    """
    Write a run report. Wall-clock information goes only to the timing sidecar so
    the report itself is byte-identical across reruns with the same seed.
    """
    path = write_json(report, path)
    if stopwatch is not None:
        write_json(stopwatch.to_dict(), timing_path(path))
    return path
