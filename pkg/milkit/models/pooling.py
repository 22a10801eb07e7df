"""
Mean and max pooling baselines
"""

from typing import Optional, Tuple

import torch
import torch.nn as nn

from milkit.data.collate import Batch
from milkit.models.base import MILModel
from milkit.models.factory import register_model


class _InstanceLogitPooling(MILModel):
    """Linear embedding and linear classifier applied per instance; instance scores are logits"""

    score_kind = "instance_logits"
    config_fields = {"embed_dim": 64}

    def __init__(self, in_dim: int, embed_dim: int = 64, criterion: Optional[nn.Module] = None):
        super().__init__(in_dim, criterion)
        self.embed = nn.Linear(in_dim, embed_dim)
        self.classifier = nn.Linear(embed_dim, 1)

    def instance_logits(self, batch: Batch) -> torch.Tensor:
        return self.classifier(self.embed(batch.features)).squeeze(-1)


@register_model("MeanPoolMIL")
class MeanPoolMIL(_InstanceLogitPooling):
    """Classifier on the masked mean of instance embeddings"""

    def forward_with_attention(self, batch: Batch) -> Tuple[torch.Tensor, torch.Tensor]:
        self.check_batch(batch)
        mask = batch.mask.unsqueeze(-1)
        embedded = self.embed(batch.features).masked_fill(~mask, 0.0)
        pooled = embedded.sum(dim=1) / mask.sum(dim=1).to(embedded.dtype)
        logits = self.classifier(pooled).squeeze(-1)
        scores = self.classifier(embedded).squeeze(-1).masked_fill(~batch.mask, 0.0)
        return logits, scores


@register_model("MaxPoolMIL")
class MaxPoolMIL(_InstanceLogitPooling):
    """Bag logit is the largest instance logit over real instances"""

    def forward_with_attention(self, batch: Batch) -> Tuple[torch.Tensor, torch.Tensor]:
        self.check_batch(batch)
        instance = self.instance_logits(batch)
        logits = instance.masked_fill(~batch.mask, float("-inf")).amax(dim=1)
        return logits, instance.masked_fill(~batch.mask, 0.0)
