"""
Model configuration, registry and construction
"""

from dataclasses import asdict, dataclass, fields
from typing import Any, Callable, Dict, List, Mapping, Optional, Type

import torch

from milkit.exceptions import ModelConfigError
from milkit.models.base import MILModel

_REGISTRY: Dict[str, Type[MILModel]] = {}

POSITIVE_INT_FIELDS = ("embed_dim", "attention_width", "n_encoder_layers", "n_heads", "mlp_width", "n_graph_layers", "sm_steps")


def register_model(name: str) -> Callable[[Type[MILModel]], Type[MILModel]]:
    """Class decorator adding a MILModel subclass to the set ``build_model`` can construct"""

    def decorator(cls: Type[MILModel]) -> Type[MILModel]:
        if not issubclass(cls, MILModel):
            raise TypeError(f"{cls.__name__} is not a MILModel subclass")
        cls.name = name
        _REGISTRY[name] = cls
        return cls

    return decorator


def available_models() -> List[str]:
    return sorted(_REGISTRY)


@dataclass
class ModelConfig:
    """
    Architecture of a model. Optional fields left as None take the model's default;
    fields the chosen model does not use must stay None.
    """

    model_name: str
    in_dim: int
    embed_dim: Optional[int] = None
    attention_width: Optional[int] = None
    n_encoder_layers: Optional[int] = None
    n_heads: Optional[int] = None
    mlp_width: Optional[int] = None
    n_graph_layers: Optional[int] = None
    sm_alpha: Optional[float] = None
    sm_steps: Optional[int] = None
    sm_attachment: Optional[str] = None
    gated: Optional[bool] = None

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "ModelConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ModelConfigError(f"unknown model config key {unknown[0]!r}")
        missing = [name for name in ("model_name", "in_dim") if name not in data]
        if missing:
            raise ModelConfigError(f"model config is missing {missing[0]!r}")
        return cls(**data)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    def model_class(self) -> Type[MILModel]:
        try:
            return _REGISTRY[self.model_name]
        except KeyError:
            raise ModelConfigError(
                f"unknown model {self.model_name!r}; supported models: {', '.join(available_models())}"
            ) from None

    def resolved(self) -> "ModelConfig":
        """Validate against the model's accepted fields and fill in defaults"""
        cls = self.model_class()
        if not isinstance(self.in_dim, int) or self.in_dim < 1:
            raise ModelConfigError(f"in_dim must be a positive integer, got {self.in_dim!r}")

        values = {}
        for f in fields(self):
            if f.name in ("model_name", "in_dim"):
                continue
            value = getattr(self, f.name)
            if f.name in cls.config_fields:
                values[f.name] = cls.config_fields[f.name] if value is None else value
            elif value is not None:
                raise ModelConfigError(f"{f.name} is not used by {self.model_name}")

        for name in POSITIVE_INT_FIELDS:
            if name in values and (not isinstance(values[name], int) or values[name] < 1):
                raise ModelConfigError(f"{name} must be a positive integer, got {values[name]!r}")
        if "n_heads" in values and values["embed_dim"] % values["n_heads"]:
            raise ModelConfigError(
                f"embed_dim ({values['embed_dim']}) must be divisible by n_heads ({values['n_heads']})"
            )
        if "sm_alpha" in values and not 0.0 <= values["sm_alpha"] <= 1.0:
            raise ModelConfigError(f"sm_alpha must lie in [0, 1], got {values['sm_alpha']}")
        return ModelConfig(model_name=self.model_name, in_dim=self.in_dim, **values)

    def model_kwargs(self) -> Dict[str, Any]:
        resolved = self.resolved()
        return {
            name: getattr(resolved, name)
            for name in resolved.model_class().config_fields
        }


def build_model(config: ModelConfig, seed: int = 0) -> MILModel:
    """
    Construct a model with parameters drawn from ``seed``; the global torch RNG is left untouched

    Raises:
        ModelConfigError: Unknown model name or invalid field combination
    """
    resolved = config.resolved()
    cls = resolved.model_class()
    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(seed)
        model = cls(in_dim=resolved.in_dim, **resolved.model_kwargs())
    model.config = resolved
    return model
