"""
Attention-based MIL models: ABMIL, TransformerABMIL and their Sm-smoothed variants
"""

from typing import Optional, Tuple

import torch
import torch.nn as nn

from milkit.data.collate import Batch
from milkit.exceptions import ModelConfigError
from milkit.models.base import MILModel
from milkit.models.factory import register_model
from milkit.nn import AttentionPool, MaskedEncoderLayer, SmParams, sm_operator

SM_ATTACHMENTS = ("attention_logits", "features")


@register_model("ABMIL")
class ABMIL(MILModel):
    """Linear embedding + ReLU, attention pooling, linear classifier"""

    config_fields = {"embed_dim": 64, "attention_width": 32, "gated": False}

    def __init__(self, in_dim: int, embed_dim: int = 64, attention_width: int = 32,
                 gated: bool = False, criterion: Optional[nn.Module] = None):
        super().__init__(in_dim, criterion)
        self.embed_dim = embed_dim
        self.embed = nn.Sequential(nn.Linear(in_dim, embed_dim), nn.ReLU())
        self.pool = AttentionPool(embed_dim, attention_width, gated)
        self.classifier = nn.Linear(embed_dim, 1)

    def encode(self, batch: Batch) -> torch.Tensor:
        return self.embed(batch.features)

    def smooth_features(self, H: torch.Tensor, batch: Batch) -> torch.Tensor:
        return H

    def smooth_logits(self, scores: torch.Tensor, batch: Batch) -> torch.Tensor:
        return scores

    def forward_with_attention(self, batch: Batch) -> Tuple[torch.Tensor, torch.Tensor]:
        self.check_batch(batch)
        H = self.smooth_features(self.encode(batch), batch)
        scores = self.smooth_logits(self.pool.logits(H), batch)
        z, weights = self.pool.pool(H, scores, batch.mask)
        return self.classifier(z).squeeze(-1), weights


@register_model("TransformerABMIL")
class TransformerABMIL(ABMIL):
    """ABMIL with a stack of masked transformer encoder layers between embedding and pooling"""

    config_fields = {
        **ABMIL.config_fields,
        "n_encoder_layers": 2,
        "n_heads": 4,
        "mlp_width": 128,
    }

    def __init__(self, in_dim: int, embed_dim: int = 64, attention_width: int = 32, gated: bool = False,
                 n_encoder_layers: int = 2, n_heads: int = 4, mlp_width: int = 128,
                 criterion: Optional[nn.Module] = None):
        super().__init__(in_dim, embed_dim, attention_width, gated, criterion)
        self.encoder = nn.ModuleList(
            MaskedEncoderLayer(embed_dim, n_heads, mlp_width) for _ in range(n_encoder_layers)
        )

    def encode(self, batch: Batch) -> torch.Tensor:
        H = self.embed(batch.features)
        for layer in self.encoder:
            H = layer(H, batch.mask)
        return H


class SmMixin:
    """
    Applies the Sm operator over the bag adjacency, either to the instance
    embeddings before pooling or to the attention logits before the softmax.
    """

    requires_adjacency = True
    sm_fields = {"sm_alpha": 0.5, "sm_steps": 10, "sm_attachment": "attention_logits"}

    def __init__(self, *args, sm_alpha: float = 0.5, sm_steps: int = 10,
                 sm_attachment: str = "attention_logits", **kwargs):
        super().__init__(*args, **kwargs)
        if sm_attachment not in SM_ATTACHMENTS:
            raise ModelConfigError(f"sm_attachment must be one of {list(SM_ATTACHMENTS)}, got {sm_attachment!r}")
        self.sm_params = SmParams(alpha=sm_alpha, steps=sm_steps)
        self.sm_params.validate()
        self.sm_attachment = sm_attachment

    def _adjacency(self, reference: torch.Tensor, batch: Batch) -> torch.Tensor:
        return batch.dense_adjacency(dtype=reference.dtype, device=reference.device)

    def smooth_features(self, H: torch.Tensor, batch: Batch) -> torch.Tensor:
        if self.sm_attachment != "features":
            return H
        return sm_operator(H, self._adjacency(H, batch), self.sm_params)

    def smooth_logits(self, scores: torch.Tensor, batch: Batch) -> torch.Tensor:
        if self.sm_attachment != "attention_logits":
            return scores
        return sm_operator(scores, self._adjacency(scores, batch), self.sm_params)


@register_model("SmABMIL")
class SmABMIL(SmMixin, ABMIL):
    config_fields = {**ABMIL.config_fields, **SmMixin.sm_fields}


@register_model("SmTransformerABMIL")
class SmTransformerABMIL(SmMixin, TransformerABMIL):
    config_fields = {**TransformerABMIL.config_fields, **SmMixin.sm_fields}
