"""
Training hyperparameters
"""

from dataclasses import asdict, dataclass, fields
from typing import Any, Dict, Mapping

from milkit.config import settings
from milkit.exceptions import ConfigError

OPTIMIZERS = ("adam",)
CHECKPOINT_POLICIES = ("best_val_auroc", "last")


@dataclass(frozen=True)
class RunConfig:
    """Defaults: batch size 1, Adam at learning rate 1e-4, 50 epochs"""

    epochs: int = 50
    batch_size: int = 1
    learning_rate: float = 1e-4
    optimizer: str = "adam"
    seed: int = 0
    val_fraction: float = 0.2
    checkpoint_policy: str = "best_val_auroc"
    device: str = settings.device

    def validate(self) -> None:
        if not isinstance(self.epochs, int) or self.epochs < 1:
            raise ConfigError(f"run.epochs must be a positive integer, got {self.epochs!r}")
        if not isinstance(self.batch_size, int) or self.batch_size < 1:
            raise ConfigError(f"run.batch_size must be a positive integer, got {self.batch_size!r}")
        if not self.learning_rate > 0:
            raise ConfigError(f"run.learning_rate must be positive, got {self.learning_rate!r}")
        if self.optimizer not in OPTIMIZERS:
            raise ConfigError(f"run.optimizer must be one of {list(OPTIMIZERS)}, got {self.optimizer!r}")
        if not 0 < self.val_fraction < 1:
            raise ConfigError(f"run.val_fraction must lie in (0, 1), got {self.val_fraction!r}")
        if self.checkpoint_policy not in CHECKPOINT_POLICIES:
            raise ConfigError(
                f"run.checkpoint_policy must be one of {list(CHECKPOINT_POLICIES)}, got {self.checkpoint_policy!r}"
            )

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        for key in data:
            if key not in known:
                raise ConfigError(f"unknown config key 'run.{key}'")
        config = cls(**data)
        config.validate()
        return config

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)
