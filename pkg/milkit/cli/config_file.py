"""
JSON run configuration with dotted command-line overrides
"""

import json
import os
from copy import deepcopy
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Union

from milkit.config import settings
from milkit.datasets.synthetic import SyntheticSpec
from milkit.exceptions import ConfigError, ModelConfigError
from milkit.models.factory import ModelConfig
from milkit.training.run_config import RunConfig

SECTIONS = ("dataset", "model", "models", "run", "output_dir", "benchmark")
DEFAULT_MODEL = {"model_name": "ABMIL"}


@dataclass(frozen=True)
class BenchmarkSection:
    k: int = 5
    test_fraction: float = 0.2
    n_jobs: int = 1

    def validate(self) -> None:
        if not isinstance(self.k, int) or self.k < 1:
            raise ConfigError(f"benchmark.k must be a positive integer, got {self.k!r}")
        if not 0 <= self.test_fraction < 1:
            raise ConfigError(f"benchmark.test_fraction must lie in [0, 1), got {self.test_fraction!r}")
        if not isinstance(self.n_jobs, int) or self.n_jobs < 1:
            raise ConfigError(f"benchmark.n_jobs must be a positive integer, got {self.n_jobs!r}")


@dataclass
class CLIConfig:
    """
    Parsed configuration file.

    ``dataset`` is either a SyntheticSpec (generated on the fly) or the path of a
    processed dataset. ``model`` and ``models`` stay raw mappings until the
    dataset's feature dimension is known.
    """

    dataset: Union[SyntheticSpec, str] = field(default_factory=SyntheticSpec)
    model: Dict[str, Any] = field(default_factory=lambda: dict(DEFAULT_MODEL))
    models: List[Dict[str, Any]] = field(default_factory=list)
    run: RunConfig = field(default_factory=RunConfig)
    output_dir: str = settings.output_dir
    benchmark: BenchmarkSection = field(default_factory=BenchmarkSection)

    @property
    def dataset_path(self) -> Optional[str]:
        return self.dataset if isinstance(self.dataset, str) else None

    def model_config(self, in_dim: int, raw: Optional[Mapping[str, Any]] = None) -> ModelConfig:
        """ModelConfig for ``raw`` (default: the ``model`` section) on data of width ``in_dim``"""
        raw = dict(self.model if raw is None else raw)
        if "in_dim" in raw and raw["in_dim"] != in_dim:
            raise ConfigError(f"model.in_dim is {raw['in_dim']} but the dataset has feature dimension {in_dim}")
        raw["in_dim"] = in_dim
        try:
            return ModelConfig.from_dict(raw).resolved()
        except ModelConfigError as e:
            raise ConfigError(f"model: {e}") from e

    def benchmark_models(self, in_dim: int) -> List[ModelConfig]:
        raw_models = self.models or [self.model]
        return [self.model_config(in_dim, raw) for raw in raw_models]

    def to_dict(self) -> Dict[str, Any]:
        dataset = self.dataset.to_dict() if isinstance(self.dataset, SyntheticSpec) else {"path": self.dataset}
        return {
            "dataset": dataset,
            "model": dict(self.model),
            "models": [dict(m) for m in self.models],
            "run": self.run.to_dict(),
            "output_dir": self.output_dir,
            "benchmark": asdict(self.benchmark),
        }


def parse_value(text: str) -> Any:
    """JSON literal when it parses (numbers, booleans, null, lists), otherwise the raw string"""
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def parse_overrides(args: Sequence[str]) -> Dict[str, Any]:
    """
    Collect ``--a.b=value`` and ``--a.b value`` pairs from leftover command-line
    arguments into a ``{"a.b": value}`` mapping
    """
    overrides: Dict[str, Any] = {}
    args = list(args)
    i = 0
    while i < len(args):
        arg = args[i]
        if not arg.startswith("--") or len(arg) == 2:
            raise ConfigError(f"unexpected argument {arg!r}; overrides look like --run.epochs=5")
        key, sep, value = arg[2:].partition("=")
        if not sep:
            if i + 1 >= len(args):
                raise ConfigError(f"override --{key} has no value")
            i += 1
            value = args[i]
        overrides[key] = parse_value(value)
        i += 1
    return overrides


def apply_overrides(data: Dict[str, Any], overrides: Mapping[str, Any]) -> Dict[str, Any]:
    """Return a copy of ``data`` with each dotted path set to its override value"""
    data = deepcopy(data)
    for dotted, value in overrides.items():
        parts = dotted.split(".")
        if parts[0] not in SECTIONS:
            raise ConfigError(f"unknown config key '{dotted}'")
        node = data
        for part in parts[:-1]:
            child = node.setdefault(part, {})
            if not isinstance(child, dict):
                raise ConfigError(f"config key '{dotted}' does not name a section")
            node = child
        node[parts[-1]] = value
    return data


def _section(data: Mapping[str, Any], name: str) -> Dict[str, Any]:
    value = data.get(name, {})
    if not isinstance(value, dict):
        raise ConfigError(f"config section '{name}' must be an object")
    return value


def _check_keys(section: str, data: Mapping[str, Any], known: Sequence[str]) -> None:
    for key in data:
        if key not in known:
            raise ConfigError(f"unknown config key '{section}.{key}'")


def _parse_dataset(data: Dict[str, Any]) -> Union[SyntheticSpec, str]:
    if "path" in data:
        _check_keys("dataset", data, ["path"])
        return str(data["path"])
    _check_keys("dataset", data, [f.name for f in fields(SyntheticSpec)])
    try:
        return SyntheticSpec(**data)
    except TypeError as e:
        raise ConfigError(f"dataset: {e}") from e


def parse_config(data: Mapping[str, Any]) -> CLIConfig:
    """Build a CLIConfig from a decoded configuration document, rejecting unknown keys"""
    for key in data:
        if key not in SECTIONS:
            raise ConfigError(f"unknown config key '{key}'")

    model = {**DEFAULT_MODEL, **_section(data, "model")}
    _check_keys("model", model, [f.name for f in fields(ModelConfig)])
    models = data.get("models", [])
    if not isinstance(models, list) or not all(isinstance(m, dict) for m in models):
        raise ConfigError("config section 'models' must be a list of objects")
    for i, entry in enumerate(models):
        _check_keys(f"models[{i}]", entry, [f.name for f in fields(ModelConfig)])

    benchmark_data = _section(data, "benchmark")
    _check_keys("benchmark", benchmark_data, [f.name for f in fields(BenchmarkSection)])
    benchmark = BenchmarkSection(**benchmark_data)
    benchmark.validate()

    return CLIConfig(
        dataset=_parse_dataset(_section(data, "dataset")),
        model=dict(model),
        models=[dict(m) for m in models],
        run=RunConfig.from_dict(_section(data, "run")),
        output_dir=str(data.get("output_dir", settings.output_dir)),
        benchmark=benchmark,
    )


def load_config(path: Optional[Union[str, os.PathLike]] = None, overrides: Optional[Mapping[str, Any]] = None,
                seed: Optional[int] = None, output: Optional[str] = None) -> CLIConfig:
    """
    Read the JSON file at ``path`` (all defaults when omitted), apply dotted
    overrides, then the ``--seed`` and ``--output`` flags.

    ``--seed`` sets both the run seed and, for synthetic data, the generator seed.
    """
    data: Dict[str, Any] = {}
    if path is not None:
        path = Path(path)
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except FileNotFoundError as e:
            raise ConfigError(f"config file not found: {path}") from e
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"cannot read config file {path}: {e}") from e
        if not isinstance(data, dict):
            raise ConfigError(f"config file {path} must hold a JSON object")

    config = parse_config(apply_overrides(data, overrides or {}))
    if seed is not None:
        config.run = replace(config.run, seed=seed)
        if isinstance(config.dataset, SyntheticSpec):
            config.dataset = replace(config.dataset, seed=seed)
    if output is not None:
        config.output_dir = output
    return config
