"""
Mask-aware pre-norm transformer encoder layer for bags of instances
"""

import math
from typing import Optional

import torch
import torch.nn as nn

from milkit.exceptions import ModelConfigError, ModelInputError

# additive bias on padded keys
MASK_BIAS = -1e9


class MaskedEncoderLayer(nn.Module):
    """
    Pre-norm multi-head self-attention followed by a pre-norm 2-layer MLP, both residual.

    No positional encoding is added, so the layer is permutation equivariant over
    instances. Padded keys receive an additive -1e9 bias before the softmax, so
    real positions never read padded ones.
    """

    def __init__(self, model_width: int, n_heads: int = 4, mlp_width: Optional[int] = None):
        super().__init__()
        if model_width < 1 or n_heads < 1 or model_width % n_heads:
            raise ModelConfigError(
                f"model_width ({model_width}) must be a positive multiple of n_heads ({n_heads})"
            )
        self.model_width = model_width
        self.n_heads = n_heads
        self.head_dim = model_width // n_heads
        self.mlp_width = mlp_width or 2 * model_width

        self.attn_norm = nn.LayerNorm(model_width)
        self.query = nn.Linear(model_width, model_width)
        self.key = nn.Linear(model_width, model_width)
        self.value = nn.Linear(model_width, model_width)
        self.out = nn.Linear(model_width, model_width)

        self.mlp_norm = nn.LayerNorm(model_width)
        self.mlp = nn.Sequential(
            nn.Linear(model_width, self.mlp_width),
            nn.GELU(),
            nn.Linear(self.mlp_width, model_width),
        )

    def _split_heads(self, x: torch.Tensor) -> torch.Tensor:
        batch_size, n, _ = x.shape
        return x.view(batch_size, n, self.n_heads, self.head_dim).transpose(1, 2)

    def self_attention(self, x: torch.Tensor, mask: Optional[torch.Tensor]) -> torch.Tensor:
        batch_size, n, _ = x.shape
        q = self._split_heads(self.query(x))
        k = self._split_heads(self.key(x))
        v = self._split_heads(self.value(x))

        scores = q @ k.transpose(-2, -1) / math.sqrt(self.head_dim)
        if mask is not None:
            bias = torch.zeros(mask.shape, dtype=scores.dtype, device=scores.device)
            bias = bias.masked_fill(~mask.to(torch.bool), MASK_BIAS)
            scores = scores + bias[:, None, None, :]
        weights = torch.softmax(scores, dim=-1)

        mixed = (weights @ v).transpose(1, 2).reshape(batch_size, n, self.model_width)
        return self.out(mixed)

    def forward(self, H: torch.Tensor, mask: Optional[torch.Tensor] = None) -> torch.Tensor:
        """
        Args:
            H: (B, N, model_width) instance embeddings
            mask: (B, N) boolean, True at real instances

        Returns:
            (B, N, model_width); values at padded positions are meaningless
        """
        if H.dim() != 3 or H.shape[-1] != self.model_width:
            raise ModelInputError(
                f"encoder layer expects (B, N, {self.model_width}) input, got {tuple(H.shape)}"
            )
        H = H + self.self_attention(self.attn_norm(H), mask)
        return H + self.mlp(self.mlp_norm(H))
