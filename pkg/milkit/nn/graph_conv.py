"""
Graph convolution over the instance graph of a bag
"""

import math
from typing import Callable, Optional

import torch
import torch.nn as nn

from milkit.data.adjacency import normalize_adjacency
from milkit.exceptions import ModelInputError


def graph_conv(H: torch.Tensor, adj: torch.Tensor, W: torch.Tensor,
               activation: Optional[Callable[[torch.Tensor], torch.Tensor]] = torch.relu) -> torch.Tensor:
    """
    H' = act(Â H W) with Â = D̂^(-1/2)(A + I)D̂^(-1/2).

    Args:
        H: (..., N, D_in) node features
        adj: (..., N, N) nonnegative symmetric adjacency, dense
        W: (D_in, D_out) weight matrix
        activation: Applied elementwise; None for a linear layer

    Returns:
        (..., N, D_out)
    """
    n, d_in = H.shape[-2], H.shape[-1]
    if adj.shape[-2:] != (n, n):
        raise ModelInputError(f"adjacency shape {tuple(adj.shape)} does not match {n} nodes")
    if W.dim() != 2 or W.shape[0] != d_in:
        raise ModelInputError(f"weight shape {tuple(W.shape)} does not match feature dimension {d_in}")

    propagated = normalize_adjacency(adj.to(H.dtype), "symmetric_with_self_loops") @ H @ W
    return activation(propagated) if activation is not None else propagated


class GraphConv(nn.Module):
    """Graph convolution layer holding W, initialized uniform(±1/√D_in)"""

    def __init__(self, in_dim: int, out_dim: int, activation: bool = True):
        super().__init__()
        self.in_dim = in_dim
        self.out_dim = out_dim
        self.activation = torch.relu if activation else None
        bound = 1.0 / math.sqrt(in_dim)
        self.weight = nn.Parameter(torch.empty(in_dim, out_dim).uniform_(-bound, bound))

    def forward(self, H: torch.Tensor, adj: torch.Tensor) -> torch.Tensor:
        return graph_conv(H, adj, self.weight, self.activation)
