"""
Softmax over the real instances of padded bags
"""

from typing import Optional

import torch

from milkit.exceptions import ModelInputError


def masked_softmax(logits: torch.Tensor, mask: Optional[torch.Tensor] = None) -> torch.Tensor:
    """
    Softmax over the last dimension restricted to ``mask``.

    Args:
        logits: (..., N) scores
        mask: (..., N) boolean, True at real instances; None means all real

    Returns:
        Weights that are exactly 0 where ``mask`` is False and sum to 1 over each row
    """
    if mask is None:
        return torch.softmax(logits, dim=-1)
    mask = mask.to(dtype=torch.bool, device=logits.device)
    if not bool(mask.any(dim=-1).all()):
        raise ModelInputError("empty bag in softmax: a mask row has no real instance")

    filled = logits.masked_fill(~mask, float("-inf"))
    shifted = filled - filled.amax(dim=-1, keepdim=True).detach()
    weights = shifted.exp()
    return weights / weights.sum(dim=-1, keepdim=True)
