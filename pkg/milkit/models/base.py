"""
Unified interface every MIL model implements
"""

from abc import ABC, abstractmethod
from typing import TYPE_CHECKING, Any, ClassVar, Dict, Optional, Tuple

import torch
import torch.nn as nn

from milkit.data.collate import Batch
from milkit.exceptions import ModelInputError

if TYPE_CHECKING:
    from milkit.models.factory import ModelConfig


class MILModel(nn.Module, ABC):
    """
    Base class for bag classifiers with a single-logit binary head.

    Subclasses implement ``forward_with_attention``; ``forward``, ``compute_loss``
    and ``predict`` are derived from it. ``config_fields`` maps the ModelConfig
    fields a subclass accepts to their defaults.
    """

    name: ClassVar[str] = "MILModel"
    requires_adjacency: ClassVar[bool] = False
    # "attention": instance scores are attention weights; "instance_logits": per-instance logits
    score_kind: ClassVar[str] = "attention"
    config_fields: ClassVar[Dict[str, Any]] = {}

    def __init__(self, in_dim: int, criterion: Optional[nn.Module] = None):
        super().__init__()
        self.in_dim = in_dim
        self.criterion = criterion if criterion is not None else nn.BCEWithLogitsLoss()
        self.config: Optional["ModelConfig"] = None

    @property
    def in_shape(self) -> Tuple[int]:
        return (self.in_dim,)

    def check_batch(self, batch: Batch) -> None:
        if batch.feature_dim != self.in_dim:
            raise ModelInputError(
                f"batch feature dimension {batch.feature_dim} does not match model in_dim {self.in_dim}"
            )
        if self.requires_adjacency and batch.adjacency is None:
            raise ModelInputError(f"{self.name} requires bag adjacency, but the batch has none")

    @abstractmethod
    def forward_with_attention(self, batch: Batch) -> Tuple[torch.Tensor, torch.Tensor]:
        """
        Returns:
            Bag logits (B,) and instance scores (B, Nmax), zero at padded positions
        """

    def forward(self, batch: Batch) -> torch.Tensor:
        return self.forward_with_attention(batch)[0]

    def compute_loss(self, batch: Batch) -> Tuple[torch.Tensor, Dict[str, torch.Tensor]]:
        """Mean binary cross-entropy with logits over the batch"""
        if batch.labels is None:
            raise ModelInputError("batch has no labels")
        logits = self(batch)
        loss = self.criterion(logits, batch.labels.to(logits.dtype))
        return loss, {"BCE": loss.detach()}

    @torch.no_grad()
    def predict(self, batch: Batch) -> Tuple[torch.Tensor, torch.Tensor]:
        """Bag probabilities and instance scores, computed in evaluation mode"""
        was_training = self.training
        self.eval()
        try:
            logits, scores = self.forward_with_attention(batch)
        finally:
            self.train(was_training)
        scores = scores.masked_fill(~batch.mask.to(device=scores.device, dtype=torch.bool), 0.0)
        return torch.sigmoid(logits), scores
