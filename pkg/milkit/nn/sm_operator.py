"""
Sm smoothing operator: damps a per-instance signal toward its graph-neighbourhood average
"""

from dataclasses import dataclass

import torch

from milkit.data.adjacency import normalize_adjacency
from milkit.exceptions import ModelConfigError, ModelInputError


@dataclass(frozen=True)
class SmParams:
    alpha: float = 0.5
    steps: int = 10
    normalization: str = "row"

    def validate(self) -> None:
        if not 0.0 <= self.alpha <= 1.0:
            raise ModelConfigError(f"sm alpha must lie in [0, 1], got {self.alpha}")
        if self.steps < 1:
            raise ModelConfigError(f"sm steps must be >= 1, got {self.steps}")
        if self.normalization != "row":
            raise ModelConfigError(f"unsupported sm normalization {self.normalization!r}")


def sm_operator(f: torch.Tensor, adj: torch.Tensor, params: SmParams = SmParams()) -> torch.Tensor:
    """
    Iterate g_{t+1} = (1 - α) f + α Ā g_t from g_0 = f and return g_T.

    Ā is the row-normalized adjacency. An isolated node averages over itself, so
    every step is a convex combination of f entries and constants are fixed points.

    Args:
        f: (..., N) or (..., N, C) per-instance signal
        adj: (..., N, N) dense nonnegative symmetric adjacency

    Returns:
        Tensor shaped like ``f``
    """
    params.validate()
    squeeze = f.dim() == adj.dim() - 1
    signal = f.unsqueeze(-1) if squeeze else f
    n = signal.shape[-2]
    if adj.shape[-2:] != (n, n):
        raise ModelInputError(f"adjacency shape {tuple(adj.shape)} does not match signal with {n} instances")

    adj = adj.to(signal.dtype)
    a_bar = normalize_adjacency(adj, "row")
    isolated = (adj.sum(dim=-1, keepdim=True) == 0).to(signal.dtype)

    g = signal
    for _ in range(params.steps):
        g = (1.0 - params.alpha) * signal + params.alpha * (a_bar @ g + isolated * g)
    return g.squeeze(-1) if squeeze else g
