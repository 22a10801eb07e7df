"""
Model checkpoints: one array file per parameter plus a JSON metadata file
"""

import json
import logging
import os
from pathlib import Path
from typing import Union

import torch

from milkit.datasets.array_file import read_array, write_array
from milkit.exceptions import ModelConfigError
from milkit.models.base import MILModel
from milkit.models.factory import ModelConfig, build_model

logger = logging.getLogger(__name__)

METADATA = "model.json"
PathLike = Union[str, os.PathLike]


def save_checkpoint(model: MILModel, directory: PathLike) -> Path:
    """
    Write every entry of the model's state dict as ``<name>.milt`` (float32)
    and the resolved ModelConfig to ``model.json``
    """
    if model.config is None:
        raise ModelConfigError("model has no config; build it with build_model")
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)

    state = model.state_dict()
    for name, tensor in state.items():
        write_array(tensor.detach().cpu().to(torch.float32).numpy(), directory / f"{name}.milt")

    metadata = {"config": model.config.to_dict(), "parameters": list(state)}
    (directory / METADATA).write_text(json.dumps(metadata, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    logger.debug("Saved %s checkpoint with %d tensors to %s", model.name, len(state), directory)
    return directory


def read_checkpoint_config(directory: PathLike) -> ModelConfig:
    path = Path(directory) / METADATA
    if not path.is_file():
        raise ModelConfigError(f"no {METADATA} in checkpoint directory {directory}")
    try:
        metadata = json.loads(path.read_text(encoding="utf-8"))
        return ModelConfig.from_dict(metadata["config"])
    except (json.JSONDecodeError, KeyError, TypeError) as e:
        raise ModelConfigError(f"unreadable checkpoint metadata {path}: {e}") from e


def load_checkpoint(directory: PathLike) -> MILModel:
    """Rebuild the model recorded in ``directory`` and load its parameters"""
    directory = Path(directory)
    model = build_model(read_checkpoint_config(directory))
    state = {}
    for name, reference in model.state_dict().items():
        path = directory / f"{name}.milt"
        if not path.is_file():
            raise ModelConfigError(f"checkpoint {directory} is missing parameter {name}")
        array = read_array(path)
        if tuple(array.shape) != tuple(reference.shape):
            raise ModelConfigError(
                f"checkpoint parameter {name} has shape {array.shape}, model expects {tuple(reference.shape)}"
            )
        state[name] = torch.from_numpy(array).to(reference.dtype)
    model.load_state_dict(state)
    model.eval()
    return model
