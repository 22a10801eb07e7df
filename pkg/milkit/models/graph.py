"""
Graph-convolution MIL model
"""

from typing import Optional, Tuple

import torch
import torch.nn as nn

from milkit.data.collate import Batch
from milkit.models.base import MILModel
from milkit.models.factory import register_model
from milkit.nn import AttentionPool, GraphConv


@register_model("GraphABMIL")
class GraphABMIL(MILModel):
    """Stacked graph convolutions over the bag adjacency, then attention pooling and a linear classifier"""

    requires_adjacency = True
    config_fields = {"embed_dim": 64, "attention_width": 32, "n_graph_layers": 2, "gated": False}

    def __init__(self, in_dim: int, embed_dim: int = 64, attention_width: int = 32,
                 n_graph_layers: int = 2, gated: bool = False, criterion: Optional[nn.Module] = None):
        super().__init__(in_dim, criterion)
        widths = [in_dim] + [embed_dim] * n_graph_layers
        self.graph_layers = nn.ModuleList(GraphConv(a, b) for a, b in zip(widths[:-1], widths[1:]))
        self.pool = AttentionPool(embed_dim, attention_width, gated)
        self.classifier = nn.Linear(embed_dim, 1)

    def forward_with_attention(self, batch: Batch) -> Tuple[torch.Tensor, torch.Tensor]:
        self.check_batch(batch)
        H = batch.features
        adjacency = batch.dense_adjacency(dtype=H.dtype, device=H.device)
        for layer in self.graph_layers:
            H = layer(H, adjacency)
        z, weights = self.pool(H, batch.mask)
        return self.classifier(z).squeeze(-1), weights
