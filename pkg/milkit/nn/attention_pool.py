"""
Attention-based MIL pooling, plain and gated
"""

from typing import Optional, Tuple

import torch
import torch.nn as nn

from milkit.nn.masked_softmax import masked_softmax


class AttentionPool(nn.Module):
    """
    Attention pooling of instance embeddings into a bag embedding.

    Scores are eᵢ = w·tanh(V hᵢ), or eᵢ = w·(tanh(V hᵢ) ⊙ σ(U hᵢ)) when gated,
    weights a = masked_softmax(e) and the bag embedding z = Σᵢ aᵢ hᵢ.

    Parameters V (L×D), w (L) and the optional gate U (L×D) are bias-free linear
    maps with PyTorch's default uniform(±1/√fan_in) initialization.
    """

    def __init__(self, in_dim: int, attention_width: int = 32, gated: bool = False):
        super().__init__()
        self.in_dim = in_dim
        self.attention_width = attention_width
        self.gated = gated

        self.V = nn.Linear(in_dim, attention_width, bias=False)
        self.U = nn.Linear(in_dim, attention_width, bias=False) if gated else None
        self.w = nn.Linear(attention_width, 1, bias=False)

    def logits(self, H: torch.Tensor) -> torch.Tensor:
        """Unnormalized attention scores, (..., N, D) -> (..., N)"""
        hidden = torch.tanh(self.V(H))
        if self.U is not None:
            hidden = hidden * torch.sigmoid(self.U(H))
        return self.w(hidden).squeeze(-1)

    def pool(self, H: torch.Tensor, scores: torch.Tensor,
             mask: Optional[torch.Tensor] = None) -> Tuple[torch.Tensor, torch.Tensor]:
        """Normalize precomputed scores and take the weighted sum of H"""
        weights = masked_softmax(scores, mask)
        if mask is not None:
            H = H.masked_fill(~mask.to(torch.bool).unsqueeze(-1), 0.0)
        z = (weights.unsqueeze(-1) * H).sum(dim=-2)
        return z, weights

    def forward(self, H: torch.Tensor, mask: Optional[torch.Tensor] = None) -> Tuple[torch.Tensor, torch.Tensor]:
        """
        Args:
            H: (B, N, D) or (N, D) instance embeddings
            mask: Matching (B, N) or (N,) boolean mask

        Returns:
            Bag embeddings z of shape (B, D) or (D,), attention weights a of shape (B, N) or (N,)
        """
        return self.pool(H, self.logits(H), mask)
